//! Declarative system model: elements, data flows, and trust boundaries,
//! annotated with Purdue levels. Parsing is purely syntactic; semantic
//! problems are reported by [`validate_model`] as data, not errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("model failed validation with {0} issue(s); run validate for details")]
    InvalidModel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Process,
    ExternalEntity,
    DataStore,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Process => "process",
            ElementKind::ExternalEntity => "external_entity",
            ElementKind::DataStore => "data_store",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "process" => Some(ElementKind::Process),
            "external_entity" => Some(ElementKind::ExternalEntity),
            "data_store" => Some(ElementKind::DataStore),
            _ => None,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Purdue reference level: numeric 0–5, or the DMZ between IT and OT.
/// Out-of-range numbers parse fine and are flagged by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PurdueLevel {
    Numeric(i64),
    Dmz,
}

impl PurdueLevel {
    pub fn numeric(self) -> Option<i64> {
        match self {
            PurdueLevel::Numeric(n) => Some(n),
            PurdueLevel::Dmz => None,
        }
    }
}

impl fmt::Display for PurdueLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PurdueLevel::Numeric(n) => write!(f, "{n}"),
            PurdueLevel::Dmz => f.write_str("DMZ"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: String,
    pub name: String,
    pub kind: ElementKind,
    pub purdue_level: PurdueLevel,
    pub zone: Option<String>,
    pub gateway: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub protocol: Option<String>,
    pub data_class: Option<String>,
    pub self_loop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustBoundary {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub elements: Vec<Element>,
    pub flows: Vec<Flow>,
    pub boundaries: Vec<TrustBoundary>,
    /// Free-text annotations carried verbatim into reports.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueCode {
    RefUnknown,
    LevelRange,
    IdFormat,
    SelfLoop,
    EmptyBoundary,
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueCode::RefUnknown => "REF_UNKNOWN",
            IssueCode::LevelRange => "LEVEL_RANGE",
            IssueCode::IdFormat => "ID_FORMAT",
            IssueCode::SelfLoop => "SELF_LOOP",
            IssueCode::EmptyBoundary => "EMPTY_BOUNDARY",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub code: IssueCode,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}): {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetInventory {
    pub external_actors: Vec<String>,
    pub processes: Vec<String>,
    pub data_stores: Vec<String>,
    pub flows: Vec<String>,
    /// Flows crossing a trust boundary.
    pub interfaces: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PurdueCode {
    LevelSkip,
    NoDmz,
}

impl fmt::Display for PurdueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PurdueCode::LevelSkip => "LEVEL_SKIP",
            PurdueCode::NoDmz => "NO_DMZ",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PurdueIssue {
    pub flow: String,
    pub code: PurdueCode,
}

impl fmt::Display for PurdueIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.code, self.flow)
    }
}

// Raw serde mirror of the file schema; conversion applies defaults and
// duplicate checks so parse errors carry useful positions.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(default)]
    elements: Vec<RawElement>,
    #[serde(default)]
    flows: Vec<RawFlow>,
    #[serde(default)]
    boundaries: Vec<RawBoundary>,
    #[serde(default)]
    notes: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElement {
    id: String,
    name: String,
    kind: String,
    purdue_level: Value,
    #[serde(default)]
    zone: Option<String>,
    #[serde(default)]
    gateway: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    #[serde(default)]
    id: Option<String>,
    source: String,
    target: String,
    #[serde(default)]
    protocol: Option<String>,
    #[serde(default)]
    data_class: Option<String>,
    #[serde(default)]
    self_loop: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    id: String,
    name: String,
    members: Vec<String>,
}

fn parse_level(v: &Value) -> Result<PurdueLevel, ModelError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(PurdueLevel::Numeric)
            .ok_or_else(|| ModelError::Parse(format!("purdue_level `{n}` is not an integer"))),
        Value::String(s) if s == "DMZ" => Ok(PurdueLevel::Dmz),
        other => Err(ModelError::Parse(format!(
            "purdue_level must be an integer or \"DMZ\", got {other}"
        ))),
    }
}

/// Parse a model file. Syntactic only: ids must be unique, but dangling
/// references and domain-rule violations are left to [`validate_model`].
pub fn parse_model(text: &str) -> Result<SystemModel, ModelError> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| {
        ModelError::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
    })?;

    let mut seen = BTreeSet::new();
    let mut elements = Vec::with_capacity(raw.elements.len());
    for e in raw.elements {
        if !seen.insert(format!("element:{}", e.id)) {
            return Err(ModelError::DuplicateId(e.id));
        }
        let kind = ElementKind::parse(&e.kind)
            .ok_or_else(|| ModelError::Parse(format!("unknown element kind `{}`", e.kind)))?;
        elements.push(Element {
            purdue_level: parse_level(&e.purdue_level)?,
            id: e.id,
            name: e.name,
            kind,
            zone: e.zone,
            gateway: e.gateway.unwrap_or(false),
        });
    }

    let mut flows = Vec::with_capacity(raw.flows.len());
    for f in raw.flows {
        let id = f.id.unwrap_or_else(|| format!("{}_to_{}", f.source, f.target));
        if !seen.insert(format!("flow:{id}")) {
            return Err(ModelError::DuplicateId(id));
        }
        flows.push(Flow {
            id,
            source: f.source,
            target: f.target,
            protocol: f.protocol,
            data_class: f.data_class,
            self_loop: f.self_loop.unwrap_or(false),
        });
    }

    let mut boundaries = Vec::with_capacity(raw.boundaries.len());
    for b in raw.boundaries {
        if !seen.insert(format!("boundary:{}", b.id)) {
            return Err(ModelError::DuplicateId(b.id));
        }
        boundaries.push(TrustBoundary { id: b.id, name: b.name, members: b.members });
    }

    Ok(SystemModel { name: raw.name, elements, flows, boundaries, notes: raw.notes })
}

fn id_ok(id: &str) -> bool {
    let mut chars = id.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Check every domain invariant plus referential integrity. Issues are data;
/// an empty list means the model is valid.
pub fn validate_model(m: &SystemModel) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let ids: BTreeSet<&str> = m.elements.iter().map(|e| e.id.as_str()).collect();

    let check_id = |id: &str, what: &str, issues: &mut Vec<ValidationIssue>| {
        if !id_ok(id) {
            issues.push(ValidationIssue {
                code: IssueCode::IdFormat,
                subject: id.to_string(),
                message: format!("{what} id must match [a-z][a-z0-9_]*"),
            });
        }
    };

    for e in &m.elements {
        check_id(&e.id, "element", &mut issues);
        if let PurdueLevel::Numeric(n) = e.purdue_level {
            if !(0..=5).contains(&n) {
                issues.push(ValidationIssue {
                    code: IssueCode::LevelRange,
                    subject: e.id.clone(),
                    message: format!("purdue_level {n} outside 0–5"),
                });
            }
        }
    }

    for f in &m.flows {
        check_id(&f.id, "flow", &mut issues);
        for end in [&f.source, &f.target] {
            if !ids.contains(end.as_str()) {
                issues.push(ValidationIssue {
                    code: IssueCode::RefUnknown,
                    subject: f.id.clone(),
                    message: format!("flow references undeclared element `{end}`"),
                });
            }
        }
        if f.source == f.target && !f.self_loop {
            issues.push(ValidationIssue {
                code: IssueCode::SelfLoop,
                subject: f.id.clone(),
                message: "source equals target but flow is not marked self_loop".into(),
            });
        }
    }

    for b in &m.boundaries {
        check_id(&b.id, "boundary", &mut issues);
        if b.members.is_empty() {
            issues.push(ValidationIssue {
                code: IssueCode::EmptyBoundary,
                subject: b.id.clone(),
                message: "boundary has no members".into(),
            });
        }
        for mref in &b.members {
            if !ids.contains(mref.as_str()) {
                issues.push(ValidationIssue {
                    code: IssueCode::RefUnknown,
                    subject: b.id.clone(),
                    message: format!("boundary member `{mref}` is not a declared element"),
                });
            }
        }
    }

    issues
}

fn ensure_valid(m: &SystemModel) -> Result<(), ModelError> {
    let issues = validate_model(m);
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ModelError::InvalidModel(issues.len()))
    }
}

/// Bucket the model contents: external actors / processes / data stores
/// partition the elements; interfaces are the boundary-crossing flows.
pub fn identify_assets(m: &SystemModel) -> Result<AssetInventory, ModelError> {
    ensure_valid(m)?;
    let mut inv = AssetInventory::default();
    for e in &m.elements {
        match e.kind {
            ElementKind::ExternalEntity => inv.external_actors.push(e.id.clone()),
            ElementKind::Process => inv.processes.push(e.id.clone()),
            ElementKind::DataStore => inv.data_stores.push(e.id.clone()),
        }
    }
    inv.flows = m.flows.iter().map(|f| f.id.clone()).collect();
    inv.interfaces = trust_boundary_crossings(m);
    Ok(inv)
}

fn boundary_memberships(m: &SystemModel) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut ms: BTreeMap<&str, BTreeSet<&str>> =
        m.elements.iter().map(|e| (e.id.as_str(), BTreeSet::new())).collect();
    for b in &m.boundaries {
        for member in &b.members {
            if let Some(set) = ms.get_mut(member.as_str()) {
                set.insert(b.id.as_str());
            }
        }
    }
    ms
}

/// Flows whose endpoints belong to different boundary membership sets.
/// Two elements inside no boundary share the empty membership set, so a
/// model without boundaries has no crossings.
pub fn trust_boundary_crossings(m: &SystemModel) -> Vec<String> {
    let ms = boundary_memberships(m);
    m.flows
        .iter()
        .filter(|f| match (ms.get(f.source.as_str()), ms.get(f.target.as_str())) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        })
        .map(|f| f.id.clone())
        .collect()
}

/// Purdue layering checks: LEVEL_SKIP when numeric levels differ by more
/// than one (and neither endpoint sits in the DMZ), NO_DMZ when an
/// enterprise-side level (>= 4) talks directly to an OT-side level (<= 3).
/// Output is sorted by (flow id, code), independent of declaration order.
pub fn purdue_check(m: &SystemModel) -> Vec<PurdueIssue> {
    let levels: BTreeMap<&str, PurdueLevel> =
        m.elements.iter().map(|e| (e.id.as_str(), e.purdue_level)).collect();
    let mut issues = Vec::new();
    for f in &m.flows {
        let (Some(src), Some(tgt)) = (levels.get(f.source.as_str()), levels.get(f.target.as_str()))
        else {
            continue;
        };
        if let (Some(a), Some(b)) = (src.numeric(), tgt.numeric()) {
            if (a - b).abs() > 1 {
                issues.push(PurdueIssue { flow: f.id.clone(), code: PurdueCode::LevelSkip });
            }
            if (a >= 4 && b <= 3) || (a <= 3 && b >= 4) {
                issues.push(PurdueIssue { flow: f.id.clone(), code: PurdueCode::NoDmz });
            }
        }
    }
    issues.sort_by(|x, y| x.flow.cmp(&y.flow).then_with(|| format!("{}", x.code).cmp(&format!("{}", y.code))));
    issues
}

impl SystemModel {
    /// Canonicalized copy: arrays sorted by id, boundary members sorted.
    pub fn canonical(&self) -> SystemModel {
        let mut m = self.clone();
        m.elements.sort_by(|a, b| a.id.cmp(&b.id));
        m.flows.sort_by(|a, b| a.id.cmp(&b.id));
        m.boundaries.sort_by(|a, b| a.id.cmp(&b.id));
        for b in &mut m.boundaries {
            b.members.sort();
        }
        m
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn flow(&self, id: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.id == id)
    }
}

/// Canonical writer: fixed key order, arrays sorted by id, two-space
/// indentation, trailing newline. `parse_model(render_model(m))` equals
/// `m.canonical()` for every valid model.
pub fn render_model(m: &SystemModel) -> String {
    let c = m.canonical();
    let mut root = Map::new();
    root.insert("name".into(), json!(c.name));

    let elements: Vec<Value> = c
        .elements
        .iter()
        .map(|e| {
            let mut o = Map::new();
            o.insert("id".into(), json!(e.id));
            o.insert("name".into(), json!(e.name));
            o.insert("kind".into(), json!(e.kind.as_str()));
            let level = match e.purdue_level {
                PurdueLevel::Numeric(n) => json!(n),
                PurdueLevel::Dmz => json!("DMZ"),
            };
            o.insert("purdue_level".into(), level);
            if let Some(z) = &e.zone {
                o.insert("zone".into(), json!(z));
            }
            if e.gateway {
                o.insert("gateway".into(), json!(true));
            }
            Value::Object(o)
        })
        .collect();
    root.insert("elements".into(), Value::Array(elements));

    let flows: Vec<Value> = c
        .flows
        .iter()
        .map(|f| {
            let mut o = Map::new();
            o.insert("id".into(), json!(f.id));
            o.insert("source".into(), json!(f.source));
            o.insert("target".into(), json!(f.target));
            if let Some(p) = &f.protocol {
                o.insert("protocol".into(), json!(p));
            }
            if let Some(d) = &f.data_class {
                o.insert("data_class".into(), json!(d));
            }
            if f.self_loop {
                o.insert("self_loop".into(), json!(true));
            }
            Value::Object(o)
        })
        .collect();
    root.insert("flows".into(), Value::Array(flows));

    let boundaries: Vec<Value> = c
        .boundaries
        .iter()
        .map(|b| {
            let mut o = Map::new();
            o.insert("id".into(), json!(b.id));
            o.insert("name".into(), json!(b.name));
            o.insert("members".into(), json!(b.members));
            Value::Object(o)
        })
        .collect();
    root.insert("boundaries".into(), Value::Array(boundaries));

    if !c.notes.is_empty() {
        root.insert("notes".into(), json!(c.notes));
    }

    let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("serialize model");
    out.push('\n');
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Deterministic DOT rendering of the model: one cluster per boundary,
/// gateways drawn as circles, everything else as boxes.
pub fn export_dot(m: &SystemModel) -> String {
    let c = m.canonical();
    let mut out = String::from("digraph model {\n  rankdir=LR;\n");
    let mut clustered: BTreeSet<&str> = BTreeSet::new();
    for b in &c.boundaries {
        out.push_str(&format!("  subgraph cluster_{} {{\n    label=\"{}\";\n", b.id, dot_escape(&b.name)));
        for member in &b.members {
            if let Some(e) = c.element(member) {
                clustered.insert(e.id.as_str());
                out.push_str(&format!(
                    "    \"{}\" [shape={}, label=\"{}\"];\n",
                    e.id,
                    if e.gateway { "circle" } else { "box" },
                    dot_escape(&e.name)
                ));
            }
        }
        out.push_str("  }\n");
    }
    for e in &c.elements {
        if !clustered.contains(e.id.as_str()) {
            out.push_str(&format!(
                "  \"{}\" [shape={}, label=\"{}\"];\n",
                e.id,
                if e.gateway { "circle" } else { "box" },
                dot_escape(&e.name)
            ));
        }
    }
    for f in &c.flows {
        out.push_str(&format!("  \"{}\" -> \"{}\" [label=\"{}\"];\n", f.source, f.target, f.id));
    }
    out.push_str("}\n");
    out
}

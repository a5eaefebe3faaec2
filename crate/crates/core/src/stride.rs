//! STRIDE threat enumeration over a system model, driven by a data file of
//! match rules. Each rule is a predicate on (source kind, target kind,
//! boundary crossing) plus title/description templates; every (flow, rule)
//! match emits exactly one threat.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{trust_boundary_crossings, validate_model, ElementKind, SystemModel};

#[derive(Debug, Error)]
pub enum StrideError {
    #[error("rule parse error: {0}")]
    Parse(String),
    #[error("duplicate rule_id `{0}`")]
    DuplicateRule(String),
    #[error("model failed validation with {0} issue(s)")]
    InvalidModel(usize),
}

/// The six STRIDE categories, in canonical declaration order (S, T, R, I, D, E).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrideCategory {
    Spoofing,
    Tampering,
    Repudiation,
    InformationDisclosure,
    DenialOfService,
    ElevationOfPrivilege,
}

pub const STRIDE_CATEGORIES: [StrideCategory; 6] = [
    StrideCategory::Spoofing,
    StrideCategory::Tampering,
    StrideCategory::Repudiation,
    StrideCategory::InformationDisclosure,
    StrideCategory::DenialOfService,
    StrideCategory::ElevationOfPrivilege,
];

impl StrideCategory {
    /// Machine identifier used in rule files, bindings, and JSON output.
    pub fn as_str(self) -> &'static str {
        match self {
            StrideCategory::Spoofing => "spoofing",
            StrideCategory::Tampering => "tampering",
            StrideCategory::Repudiation => "repudiation",
            StrideCategory::InformationDisclosure => "information_disclosure",
            StrideCategory::DenialOfService => "denial_of_service",
            StrideCategory::ElevationOfPrivilege => "elevation_of_privilege",
        }
    }

    /// Human-readable name as used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            StrideCategory::Spoofing => "Spoofing",
            StrideCategory::Tampering => "Tampering",
            StrideCategory::Repudiation => "Repudiation",
            StrideCategory::InformationDisclosure => "Information Disclosure",
            StrideCategory::DenialOfService => "Denial Of Service",
            StrideCategory::ElevationOfPrivilege => "Elevation Of Privilege",
        }
    }

    /// One-line definition of the threat class.
    pub fn definition(self) -> &'static str {
        match self {
            StrideCategory::Spoofing => "Posing as another user, device, or service",
            StrideCategory::Tampering => "Unauthorized modification of data in transit or at rest",
            StrideCategory::Repudiation => {
                "Denying having performed an action that cannot be proven otherwise"
            }
            StrideCategory::InformationDisclosure => {
                "Exposing information to parties not authorized to see it"
            }
            StrideCategory::DenialOfService => {
                "Degrading or blocking access to a service or resource"
            }
            StrideCategory::ElevationOfPrivilege => {
                "Obtaining capabilities or rights beyond those granted"
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        STRIDE_CATEGORIES.iter().copied().find(|c| c.as_str() == s)
    }

    /// Position in canonical declaration order, used for tie-breaking.
    pub fn order(self) -> usize {
        self as usize
    }

    /// The six categories sorted by display name, the order summary tables use.
    pub fn alphabetical() -> [StrideCategory; 6] {
        let mut cats = STRIDE_CATEGORIES;
        cats.sort_by_key(|c| c.display_name());
        cats
    }
}

impl fmt::Display for StrideCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Element-kind predicate: a concrete kind or a wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindPattern {
    Any,
    Kind(ElementKind),
}

impl KindPattern {
    fn matches(self, kind: ElementKind) -> bool {
        match self {
            KindPattern::Any => true,
            KindPattern::Kind(k) => k == kind,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if s == "any" {
            Some(KindPattern::Any)
        } else {
            ElementKind::parse(s).map(KindPattern::Kind)
        }
    }

}

/// Tri-state boundary-crossing predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingPattern {
    Yes,
    No,
    Any,
}

impl CrossingPattern {
    fn matches(self, crossing: bool) -> bool {
        match self {
            CrossingPattern::Any => true,
            CrossingPattern::Yes => crossing,
            CrossingPattern::No => !crossing,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "yes" => Some(CrossingPattern::Yes),
            "no" => Some(CrossingPattern::No),
            "any" => Some(CrossingPattern::Any),
            _ => None,
        }
    }

}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreatRule {
    pub rule_id: String,
    pub category: StrideCategory,
    pub source_kind: KindPattern,
    pub target_kind: KindPattern,
    pub requires_boundary_crossing: CrossingPattern,
    pub title_template: String,
    pub description_template: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<ThreatRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threat {
    pub threat_id: String,
    pub rule_id: String,
    pub category: StrideCategory,
    /// Flow id the threat is bound to.
    pub interaction: String,
    /// Element the threat counts against: the flow target, except Spoofing,
    /// which attributes to the source (the identity being impersonated).
    pub attributed_asset: String,
    pub title: String,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThreatSet {
    pub model_name: String,
    /// Canonical order: (interaction id, category, rule_id).
    pub threats: Vec<Threat>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    rule_id: String,
    category: String,
    source_kind: String,
    target_kind: String,
    requires_boundary_crossing: String,
    title_template: String,
    description_template: String,
}

/// Placeholders a template may reference.
const PLACEHOLDERS: [&str; 3] = ["source", "target", "flow"];

fn check_template(rule_id: &str, template: &str) -> Result<(), StrideError> {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let tail = &rest[open + 1..];
        let Some(close) = tail.find('}') else {
            return Err(StrideError::Parse(format!(
                "rule `{rule_id}`: unclosed placeholder in template"
            )));
        };
        let name = &tail[..close];
        if !PLACEHOLDERS.contains(&name) {
            return Err(StrideError::Parse(format!(
                "rule `{rule_id}`: unknown placeholder `{{{name}}}` (allowed: source, target, flow)"
            )));
        }
        rest = &tail[close + 1..];
    }
    Ok(())
}

pub fn load_rules(text: &str) -> Result<RuleSet, StrideError> {
    let raw: Vec<RawRule> = serde_json::from_str(text).map_err(|e| {
        StrideError::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
    })?;
    let mut seen = BTreeSet::new();
    let mut rules = Vec::with_capacity(raw.len());
    for r in raw {
        if !seen.insert(r.rule_id.clone()) {
            return Err(StrideError::DuplicateRule(r.rule_id));
        }
        let category = StrideCategory::parse(&r.category).ok_or_else(|| {
            StrideError::Parse(format!("rule `{}`: unknown category `{}`", r.rule_id, r.category))
        })?;
        let source_kind = KindPattern::parse(&r.source_kind).ok_or_else(|| {
            StrideError::Parse(format!("rule `{}`: bad source_kind `{}`", r.rule_id, r.source_kind))
        })?;
        let target_kind = KindPattern::parse(&r.target_kind).ok_or_else(|| {
            StrideError::Parse(format!("rule `{}`: bad target_kind `{}`", r.rule_id, r.target_kind))
        })?;
        let crossing = CrossingPattern::parse(&r.requires_boundary_crossing).ok_or_else(|| {
            StrideError::Parse(format!(
                "rule `{}`: requires_boundary_crossing must be yes/no/any",
                r.rule_id
            ))
        })?;
        check_template(&r.rule_id, &r.title_template)?;
        check_template(&r.rule_id, &r.description_template)?;
        rules.push(ThreatRule {
            rule_id: r.rule_id,
            category,
            source_kind,
            target_kind,
            requires_boundary_crossing: crossing,
            title_template: r.title_template,
            description_template: r.description_template,
        });
    }
    Ok(RuleSet { rules })
}

fn fill(template: &str, source: &str, target: &str, flow: &str) -> String {
    template
        .replace("{source}", source)
        .replace("{target}", target)
        .replace("{flow}", flow)
}

/// Cross every flow with every rule; emit one threat per match. Output is
/// deterministic: sorted by (interaction, category, rule_id).
pub fn enumerate_threats(m: &SystemModel, rules: &RuleSet) -> Result<ThreatSet, StrideError> {
    let issues = validate_model(m);
    if !issues.is_empty() {
        return Err(StrideError::InvalidModel(issues.len()));
    }
    let kinds: BTreeMap<&str, ElementKind> =
        m.elements.iter().map(|e| (e.id.as_str(), e.kind)).collect();
    let crossings: BTreeSet<String> = trust_boundary_crossings(m).into_iter().collect();

    let mut threats = Vec::new();
    for flow in &m.flows {
        let src_kind = kinds[flow.source.as_str()];
        let tgt_kind = kinds[flow.target.as_str()];
        let crossing = crossings.contains(&flow.id);
        for rule in &rules.rules {
            if !rule.source_kind.matches(src_kind)
                || !rule.target_kind.matches(tgt_kind)
                || !rule.requires_boundary_crossing.matches(crossing)
            {
                continue;
            }
            let attributed_asset = if rule.category == StrideCategory::Spoofing {
                flow.source.clone()
            } else {
                flow.target.clone()
            };
            threats.push(Threat {
                threat_id: format!("{}:{}", rule.rule_id, flow.id),
                rule_id: rule.rule_id.clone(),
                category: rule.category,
                interaction: flow.id.clone(),
                attributed_asset,
                title: fill(&rule.title_template, &flow.source, &flow.target, &flow.id),
                description: fill(&rule.description_template, &flow.source, &flow.target, &flow.id),
            });
        }
    }
    threats.sort_by(|a, b| {
        a.interaction
            .cmp(&b.interaction)
            .then_with(|| a.category.order().cmp(&b.category.order()))
            .then_with(|| a.rule_id.cmp(&b.rule_id))
    });
    Ok(ThreatSet { model_name: m.name.clone(), threats })
}

/// Per-category counts in display-name alphabetical order (the order the
/// summary tables use). Always six rows; absent categories count zero.
pub fn summarize_by_category(ts: &ThreatSet) -> Vec<(StrideCategory, usize)> {
    let mut counts: BTreeMap<StrideCategory, usize> = BTreeMap::new();
    for t in &ts.threats {
        *counts.entry(t.category).or_insert(0) += 1;
    }
    StrideCategory::alphabetical()
        .iter()
        .map(|&c| (c, counts.get(&c).copied().unwrap_or(0)))
        .collect()
}

/// Per-asset counts keyed by attributed asset, sorted by asset id. Single
/// attribution means the counts sum to the set size.
pub fn summarize_by_asset(ts: &ThreatSet) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in &ts.threats {
        *counts.entry(t.attributed_asset.clone()).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

/// Canonical JSON serialization of a threat set.
pub fn render_threats_json(ts: &ThreatSet) -> String {
    let threats: Vec<Value> = ts
        .threats
        .iter()
        .map(|t| {
            let mut o = Map::new();
            o.insert("threat_id".into(), json!(t.threat_id));
            o.insert("category".into(), json!(t.category.as_str()));
            o.insert("interaction".into(), json!(t.interaction));
            o.insert("attributed_asset".into(), json!(t.attributed_asset));
            o.insert("title".into(), json!(t.title));
            o.insert("description".into(), json!(t.description));
            Value::Object(o)
        })
        .collect();
    let mut root = Map::new();
    root.insert("model".into(), json!(ts.model_name));
    root.insert("threats".into(), Value::Array(threats));
    let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("serialize threats");
    out.push('\n');
    out
}

/// Markdown listing: summary table plus one row per threat.
pub fn render_threats_markdown(ts: &ThreatSet) -> String {
    let mut out = format!("# Threats — {}\n\n", ts.model_name);
    out.push_str("| Category | Count |\n| --- | --- |\n");
    for (cat, count) in summarize_by_category(ts) {
        out.push_str(&format!("| {} | {} |\n", cat.display_name(), count));
    }
    out.push_str(&format!("\nTotal: {}\n\n", ts.threats.len()));
    out.push_str("| Threat | Category | Interaction | Asset | Title |\n| --- | --- | --- | --- | --- |\n");
    for t in &ts.threats {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            t.threat_id,
            t.category.display_name(),
            t.interaction,
            t.attributed_asset,
            t.title
        ));
    }
    out
}

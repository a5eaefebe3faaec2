//! Tactic/technique matrix handling, STRIDE-to-technique mapping, attack
//! graph construction over a system model, and simple-path enumeration with
//! multiplicative ranking.
//!
//! The graph's nodes are (element, technique) pairs contributed by threats;
//! edges run left-to-right across matrix columns and only between elements
//! that are identical or connected by a model flow, which keeps enumerated
//! chains physically plausible.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::model::SystemModel;
use crate::scoring::Score;
use crate::stride::{StrideCategory, Threat, ThreatSet};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("attack data parse error: {0}")]
    Parse(String),
    #[error("technique `{technique}` references unknown tactic `{tactic}`")]
    BadTactic { technique: String, tactic: String },
    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),
    #[error("unknown tactic `{0}`")]
    UnknownTactic(String),
    #[error("no technique mapping for category `{0}`")]
    UnmappedCategory(String),
    #[error("bad path bounds: {0}")]
    BadBounds(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tactic {
    pub name: String,
    /// Matrix column, 0-based, left to right.
    pub column_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Technique {
    /// Slug of the name; unique only together with the tactic.
    pub technique_id: String,
    pub name: String,
    /// Owning tactic name.
    pub tactic: String,
}

/// Lowercase the name and squash every non-alphanumeric run to one hyphen,
/// e.g. "Brute Force I/O" → "brute-force-i-o".
pub fn technique_slug(name: &str) -> String {
    let mut out = String::new();
    let mut gap = false;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('-');
            }
            gap = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            gap = true;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackMatrix {
    /// All twelve tactics in column order.
    pub tactics: Vec<Tactic>,
    /// Techniques in file order (column order, top to bottom).
    pub techniques: Vec<Technique>,
}

impl AttackMatrix {
    pub fn tactic(&self, name: &str) -> Result<&Tactic, AttackError> {
        self.tactics
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| AttackError::UnknownTactic(name.to_string()))
    }

    pub fn column_of(&self, tactic_name: &str) -> Option<usize> {
        self.tactics.iter().find(|t| t.name == tactic_name).map(|t| t.column_index)
    }

    /// All instances of a technique name, in column order. Names repeat
    /// across tactics, so this can return more than one.
    pub fn lookup(&self, technique_name: &str) -> Result<Vec<&Technique>, AttackError> {
        let found: Vec<&Technique> =
            self.techniques.iter().filter(|t| t.name == technique_name).collect();
        if found.is_empty() {
            return Err(AttackError::UnknownTechnique(technique_name.to_string()));
        }
        Ok(found)
    }

    pub fn techniques_in(&self, tactic_name: &str) -> Vec<&Technique> {
        self.techniques.iter().filter(|t| t.tactic == tactic_name).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    tactics: Vec<String>,
    techniques: Vec<RawTechnique>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTechnique {
    name: String,
    tactic: String,
}

/// Parse and validate a matrix file: `{"tactics": [...], "techniques":
/// [{"name", "tactic"}, ...]}` with exactly twelve tactics.
pub fn load_attack_matrix(text: &str) -> Result<AttackMatrix, AttackError> {
    let raw: RawMatrix =
        serde_json::from_str(text).map_err(|e| AttackError::Parse(e.to_string()))?;
    if raw.tactics.len() != 12 {
        return Err(AttackError::Parse(format!(
            "expected 12 tactics, got {}",
            raw.tactics.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for name in &raw.tactics {
        if !seen.insert(name.clone()) {
            return Err(AttackError::Parse(format!("duplicate tactic `{name}`")));
        }
    }
    let tactics: Vec<Tactic> = raw
        .tactics
        .into_iter()
        .enumerate()
        .map(|(column_index, name)| Tactic { name, column_index })
        .collect();

    let mut pairs = BTreeSet::new();
    let mut techniques = Vec::with_capacity(raw.techniques.len());
    for rt in raw.techniques {
        if !tactics.iter().any(|t| t.name == rt.tactic) {
            return Err(AttackError::BadTactic { technique: rt.name, tactic: rt.tactic });
        }
        if !pairs.insert((rt.tactic.clone(), rt.name.clone())) {
            return Err(AttackError::Parse(format!(
                "technique `{}` listed twice under tactic `{}`",
                rt.name, rt.tactic
            )));
        }
        techniques.push(Technique {
            technique_id: technique_slug(&rt.name),
            name: rt.name,
            tactic: rt.tactic,
        });
    }
    Ok(AttackMatrix { tactics, techniques })
}

/// A technique instance resolved against a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechniqueRef {
    pub tactic: String,
    pub column_index: usize,
    pub technique_id: String,
    pub name: String,
}

/// STRIDE category → resolved technique refs, sorted by (column, name).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingTable {
    pub entries: BTreeMap<StrideCategory, Vec<TechniqueRef>>,
}

/// Parse a mapping file (`{"spoofing": ["Rogue Master", ...], ...}`) and
/// resolve every listed name against the matrix. A name that repeats across
/// tactics expands to all of its instances.
pub fn load_mapping(text: &str, matrix: &AttackMatrix) -> Result<MappingTable, AttackError> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_str(text).map_err(|e| AttackError::Parse(e.to_string()))?;
    let mut entries = BTreeMap::new();
    for (key, names) in raw {
        let category = StrideCategory::parse(&key)
            .ok_or_else(|| AttackError::Parse(format!("unknown category key `{key}`")))?;
        let mut seen = BTreeSet::new();
        let mut refs = Vec::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(AttackError::Parse(format!(
                    "technique `{name}` listed twice under `{key}`"
                )));
            }
            for t in matrix.lookup(name)? {
                let column_index = matrix
                    .column_of(&t.tactic)
                    .expect("technique tactic validated at matrix load");
                refs.push(TechniqueRef {
                    tactic: t.tactic.clone(),
                    column_index,
                    technique_id: t.technique_id.clone(),
                    name: t.name.clone(),
                });
            }
        }
        refs.sort_by(|a, b| {
            a.column_index.cmp(&b.column_index).then_with(|| a.name.cmp(&b.name))
        });
        entries.insert(category, refs);
    }
    Ok(MappingTable { entries })
}

/// Technique instances a threat of this category lands on, in (column,
/// name) order.
pub fn map_threat_to_techniques<'a>(
    threat: &Threat,
    mapping: &'a MappingTable,
) -> Result<&'a [TechniqueRef], AttackError> {
    mapping
        .entries
        .get(&threat.category)
        .map(Vec::as_slice)
        .ok_or_else(|| AttackError::UnmappedCategory(threat.category.as_str().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackNode {
    /// Asset id the underlying threats attribute to.
    pub element: String,
    pub tactic: String,
    pub column_index: usize,
    pub technique_id: String,
    pub technique: String,
    /// Ids of the threats that contributed this node, sorted.
    pub threats: Vec<String>,
}

impl AttackNode {
    /// Stable id used in path tie-breaking and DOT output.
    pub fn step_id(&self) -> String {
        format!("{}/{}", self.element, self.technique_id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AttackGraph {
    /// Canonical order: (element, column, technique name).
    pub nodes: Vec<AttackNode>,
    /// Adjacency lists; `edges[u]` holds successor indexes in ascending order.
    pub edges: Vec<Vec<usize>>,
}

impl AttackGraph {
    /// Assemble a graph directly from nodes and (from, to) index pairs —
    /// the door through which equivalence tests feed hand-made graphs.
    pub fn from_parts(nodes: Vec<AttackNode>, edge_pairs: &[(usize, usize)]) -> AttackGraph {
        let mut edges = vec![Vec::new(); nodes.len()];
        for &(u, v) in edge_pairs {
            edges[u].push(v);
        }
        for list in &mut edges {
            list.sort_unstable();
            list.dedup();
        }
        AttackGraph { nodes, edges }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }
}

/// One node visit within a path.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackStep {
    pub element: String,
    pub tactic: String,
    pub column_index: usize,
    pub technique_id: String,
    pub technique: String,
    /// Representative contributing threat, when the graph knows one.
    pub threat: Option<String>,
    pub cwe_note: Option<String>,
    /// Filled in by ranking when a score lookup covers this step.
    pub score: Option<Score>,
}

impl AttackStep {
    pub fn step_id(&self) -> String {
        format!("{}/{}", self.element, self.technique_id)
    }

    fn from_node(node: &AttackNode) -> AttackStep {
        AttackStep {
            element: node.element.clone(),
            tactic: node.tactic.clone(),
            column_index: node.column_index,
            technique_id: node.technique_id.clone(),
            technique: node.technique.clone(),
            threat: node.threats.first().cloned(),
            cwe_note: None,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackPath {
    /// Goal tactic name (the last step's tactic).
    pub goal: String,
    pub steps: Vec<AttackStep>,
    /// 10 · Π(step_score / 10); unscored steps count as 5.0.
    pub path_score: f64,
}

/// Build the graph: one node per distinct (attributed element, technique
/// instance) over all threats, edges by column order plus flow adjacency.
pub fn build_attack_graph(
    model: &SystemModel,
    threats: &ThreatSet,
    matrix: &AttackMatrix,
    mapping: &MappingTable,
) -> Result<AttackGraph, AttackError> {
    let _ = matrix; // techniques arrive pre-resolved through the mapping
    let mut grouped: BTreeMap<(String, usize, String), (TechniqueRef, BTreeSet<String>)> =
        BTreeMap::new();
    for threat in &threats.threats {
        if model.element(&threat.attributed_asset).is_none() {
            return Err(AttackError::InvalidModel(format!(
                "threat `{}` attributes to unknown element `{}`",
                threat.threat_id, threat.attributed_asset
            )));
        }
        for tref in map_threat_to_techniques(threat, mapping)? {
            let key =
                (threat.attributed_asset.clone(), tref.column_index, tref.name.clone());
            grouped
                .entry(key)
                .or_insert_with(|| (tref.clone(), BTreeSet::new()))
                .1
                .insert(threat.threat_id.clone());
        }
    }

    let nodes: Vec<AttackNode> = grouped
        .into_iter()
        .map(|((element, _, _), (tref, ids))| AttackNode {
            element,
            tactic: tref.tactic,
            column_index: tref.column_index,
            technique_id: tref.technique_id,
            technique: tref.name,
            threats: ids.into_iter().collect(),
        })
        .collect();

    let flow_pairs: BTreeSet<(&str, &str)> =
        model.flows.iter().map(|f| (f.source.as_str(), f.target.as_str())).collect();
    let mut edges = vec![Vec::new(); nodes.len()];
    for (u, from) in nodes.iter().enumerate() {
        for (v, to) in nodes.iter().enumerate() {
            if u == v || to.column_index < from.column_index {
                continue;
            }
            if from.element == to.element
                || flow_pairs.contains(&(from.element.as_str(), to.element.as_str()))
            {
                edges[u].push(v);
            }
        }
    }
    Ok(AttackGraph { nodes, edges })
}

/// All simple paths from an entry-tactic node to a goal-tactic node with at
/// most `max_len` nodes, ranked (unscored steps count 5.0) and truncated to
/// `max_paths`.
pub fn enumerate_paths(
    graph: &AttackGraph,
    entry: &Tactic,
    goal: &Tactic,
    max_len: usize,
    max_paths: usize,
) -> Result<Vec<AttackPath>, AttackError> {
    if max_len < 2 {
        return Err(AttackError::BadBounds(format!(
            "max path length must be at least 2, got {max_len}"
        )));
    }
    if entry.column_index >= goal.column_index {
        return Err(AttackError::BadBounds(format!(
            "entry tactic `{}` (column {}) does not precede goal tactic `{}` (column {})",
            entry.name, entry.column_index, goal.name, goal.column_index
        )));
    }

    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut visited = vec![false; graph.nodes.len()];
    let mut trail: Vec<usize> = Vec::new();

    fn walk(
        graph: &AttackGraph,
        goal: &str,
        max_len: usize,
        node: usize,
        visited: &mut Vec<bool>,
        trail: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        visited[node] = true;
        trail.push(node);
        if graph.nodes[node].tactic == goal && trail.len() >= 2 {
            found.push(trail.clone());
        }
        if trail.len() < max_len {
            for &next in &graph.edges[node] {
                if !visited[next] {
                    walk(graph, goal, max_len, next, visited, trail, found);
                }
            }
        }
        trail.pop();
        visited[node] = false;
    }

    for start in 0..graph.nodes.len() {
        if graph.nodes[start].tactic == entry.name {
            walk(graph, &goal.name, max_len, start, &mut visited, &mut trail, &mut found);
        }
    }

    let paths = found
        .into_iter()
        .map(|indexes| {
            let steps: Vec<AttackStep> =
                indexes.iter().map(|&i| AttackStep::from_node(&graph.nodes[i])).collect();
            AttackPath { goal: goal.name.clone(), steps, path_score: 0.0 }
        })
        .collect();
    let mut ranked = rank_paths(paths, &BTreeMap::new());
    ranked.truncate(max_paths);
    Ok(ranked)
}

/// Attach per-step scores (keyed by `element/technique-slug`), recompute
/// path scores, and order: score descending, then fewer steps, then step-id
/// sequence, then column sequence.
pub fn rank_paths(
    mut paths: Vec<AttackPath>,
    scores: &BTreeMap<String, Score>,
) -> Vec<AttackPath> {
    for path in &mut paths {
        let mut product = 10.0;
        for step in &mut path.steps {
            if let Some(score) = scores.get(&step.step_id()) {
                step.score = Some(*score);
            }
            let value = step.score.map(|s| s.value).unwrap_or(5.0);
            product *= value / 10.0;
        }
        path.path_score = product;
    }

    let mut decorated: Vec<(Vec<String>, Vec<usize>, AttackPath)> = paths
        .into_iter()
        .map(|p| {
            let ids: Vec<String> = p.steps.iter().map(AttackStep::step_id).collect();
            let cols: Vec<usize> = p.steps.iter().map(|s| s.column_index).collect();
            (ids, cols, p)
        })
        .collect();
    decorated.sort_by(|(a_ids, a_cols, a), (b_ids, b_cols, b)| {
        b.path_score
            .total_cmp(&a.path_score)
            .then(a.steps.len().cmp(&b.steps.len()))
            .then_with(|| a_ids.cmp(b_ids))
            .then_with(|| a_cols.cmp(b_cols))
    });
    decorated.into_iter().map(|(_, _, p)| p).collect()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render ranked paths as a DOT digraph, one cluster per path, nodes
/// labeled `element / technique / tactic`.
pub fn export_paths_dot(paths: &[AttackPath]) -> String {
    let mut out = String::from("digraph attack_paths {\n  rankdir=LR;\n  node [shape=box];\n");
    for (pi, path) in paths.iter().enumerate() {
        out.push_str(&format!(
            "  subgraph cluster_path_{pi} {{\n    label=\"#{} to {} (score {:.2})\";\n",
            pi + 1,
            dot_escape(&path.goal),
            path.path_score
        ));
        for (si, step) in path.steps.iter().enumerate() {
            out.push_str(&format!(
                "    p{pi}_s{si} [label=\"{} / {} / {}\"];\n",
                dot_escape(&step.element),
                dot_escape(&step.technique),
                dot_escape(&step.tactic)
            ));
        }
        for si in 1..path.steps.len() {
            out.push_str(&format!("    p{pi}_s{} -> p{pi}_s{si};\n", si - 1));
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

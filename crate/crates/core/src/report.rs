//! Deterministic report assembly and rendering. Reports carry a digest of
//! the exact inputs instead of a timestamp, so regenerating from the same
//! files produces byte-identical output.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::attack::AttackPath;
use crate::model::SystemModel;
use crate::nvd::ScoredThreatSet;
use crate::scoring::severity_bucket;
use crate::stride::{summarize_by_asset, summarize_by_category, StrideCategory, ThreatSet};

#[derive(Debug, Clone, PartialEq)]
pub struct TopThreatRow {
    pub category: StrideCategory,
    pub interaction: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocument {
    pub model: String,
    /// Content hash of the input files the report was generated from.
    pub digest: String,
    pub summary_by_category: Vec<(StrideCategory, usize)>,
    pub summary_by_asset: Vec<(String, usize)>,
    pub top_threats: Vec<TopThreatRow>,
    pub paths: Vec<AttackPath>,
    /// Free-form remarks carried over from the model file.
    pub notes: Vec<String>,
}

/// SHA-256 over length-prefixed input texts, hex-encoded. Length prefixes
/// keep distinct part lists from colliding by concatenation.
pub fn input_digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part.as_bytes());
    }
    let mut out = String::with_capacity(64);
    for byte in hasher.finalize() {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Highest score per (category, interaction) class, descending; ties go to
/// the earlier STRIDE category, then the smaller interaction id. Unscored
/// threats never appear.
pub fn top_n(scored: &ScoredThreatSet, n: usize) -> Vec<TopThreatRow> {
    let mut best: BTreeMap<(usize, String), (StrideCategory, f64)> = BTreeMap::new();
    for st in &scored.threats {
        let Some(score) = st.score else { continue };
        let key = (st.threat.category.order(), st.threat.interaction.clone());
        let entry = best.entry(key).or_insert((st.threat.category, f64::NEG_INFINITY));
        if score.value > entry.1 {
            entry.1 = score.value;
        }
    }
    let mut rows: Vec<TopThreatRow> = best
        .into_iter()
        .map(|((_, interaction), (category, score))| TopThreatRow { category, interaction, score })
        .collect();
    rows.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.category.order().cmp(&b.category.order()))
            .then_with(|| a.interaction.cmp(&b.interaction))
    });
    rows.truncate(n);
    rows
}

pub fn build_report(
    model: &SystemModel,
    scored: &ScoredThreatSet,
    paths: &[AttackPath],
    top: usize,
    digest: &str,
) -> ReportDocument {
    let threats = ThreatSet {
        model_name: scored.model_name.clone(),
        threats: scored.threats.iter().map(|st| st.threat.clone()).collect(),
    };
    ReportDocument {
        model: model.name.clone(),
        digest: digest.to_string(),
        summary_by_category: summarize_by_category(&threats),
        summary_by_asset: summarize_by_asset(&threats),
        top_threats: top_n(scored, top),
        paths: paths.to_vec(),
        notes: model.notes.clone(),
    }
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

pub fn render_markdown(doc: &ReportDocument) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Threat Model Report: {}\n\n", doc.model));
    out.push_str(&format!("Input digest: `{}`\n\n", doc.digest));

    out.push_str("## Summary by Category\n\n");
    out.push_str("| Category | Count |\n| --- | --- |\n");
    let mut total = 0;
    for (category, count) in &doc.summary_by_category {
        out.push_str(&format!("| {} | {} |\n", category.display_name(), count));
        total += count;
    }
    out.push_str(&format!("| **Total** | **{total}** |\n\n"));

    out.push_str("## Summary per Asset\n\n");
    out.push_str("| Asset | Count |\n| --- | --- |\n");
    let mut total = 0;
    for (asset, count) in &doc.summary_by_asset {
        out.push_str(&format!("| {asset} | {count} |\n"));
        total += count;
    }
    out.push_str(&format!("| **Total** | **{total}** |\n\n"));

    out.push_str(&format!("## Top {} Threats\n\n", doc.top_threats.len()));
    out.push_str("| # | Category | Interaction | Score | Severity |\n");
    out.push_str("| --- | --- | --- | --- | --- |\n");
    for (i, row) in doc.top_threats.iter().enumerate() {
        out.push_str(&format!(
            "| {} | {} | {} | {:.1} | {} |\n",
            i + 1,
            row.category.display_name(),
            row.interaction,
            row.score,
            severity_bucket(row.score)
        ));
    }
    out.push('\n');

    out.push_str("## Attack Paths\n\n");
    out.push_str("| # | Goal | Score | Steps |\n| --- | --- | --- | --- |\n");
    for (i, path) in doc.paths.iter().enumerate() {
        let steps: Vec<String> = path
            .steps
            .iter()
            .map(|s| format!("{}: {} ({})", s.element, s.technique, s.tactic))
            .collect();
        out.push_str(&format!(
            "| {} | {} | {:.2} | {} |\n",
            i + 1,
            path.goal,
            round4(path.path_score),
            steps.join(" → ")
        ));
    }
    out.push('\n');

    if !doc.notes.is_empty() {
        out.push_str("## Notes\n\n");
        for note in &doc.notes {
            out.push_str(&format!("- {note}\n"));
        }
        out.push('\n');
    }
    out
}

pub fn render_json(doc: &ReportDocument) -> String {
    let summary_by_category: Vec<serde_json::Value> = doc
        .summary_by_category
        .iter()
        .map(|(category, count)| {
            serde_json::json!({"category": category.as_str(), "count": count})
        })
        .collect();
    let summary_by_asset: Vec<serde_json::Value> = doc
        .summary_by_asset
        .iter()
        .map(|(asset, count)| serde_json::json!({"asset": asset, "count": count}))
        .collect();
    let top_threats: Vec<serde_json::Value> = doc
        .top_threats
        .iter()
        .map(|row| {
            serde_json::json!({
                "category": row.category.as_str(),
                "interaction": row.interaction,
                "score": row.score,
            })
        })
        .collect();
    let paths: Vec<serde_json::Value> = doc
        .paths
        .iter()
        .map(|path| {
            let steps: Vec<serde_json::Value> = path
                .steps
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "element": s.element,
                        "technique": s.technique,
                        "tactic": s.tactic,
                    })
                })
                .collect();
            serde_json::json!({
                "goal": path.goal,
                "score": round4(path.path_score),
                "steps": steps,
            })
        })
        .collect();

    let document = serde_json::json!({
        "model": doc.model,
        "digest": doc.digest,
        "summary_by_category": summary_by_category,
        "summary_by_asset": summary_by_asset,
        "top_threats": top_threats,
        "paths": paths,
        "notes": doc.notes,
    });
    let mut text = serde_json::to_string_pretty(&document).expect("report serialization");
    text.push('\n');
    text
}

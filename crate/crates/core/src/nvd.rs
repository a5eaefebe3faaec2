//! Offline CVE feed handling plus an optional online fetcher speaking the
//! public NVD CVE API 2.0 contract. Feeds bind real-world scores onto
//! enumerated threats through explicit (interaction, category) bindings —
//! no fuzzy CVE-to-threat matching.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{score_composite, CompositeMetrics, Score, ScoreMethod};
use crate::stride::{StrideCategory, Threat, ThreatSet};

#[derive(Debug, Error)]
pub enum NvdError {
    #[error("feed parse error: {0}")]
    Parse(String),
    #[error("duplicate CVE id `{0}`")]
    DupCve(String),
    #[error("unknown binding: {0}")]
    UnknownBinding(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("bad response: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CveRecord {
    pub cve_id: String,
    pub description: String,
    pub vendor_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector_string: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CveCatalog {
    pub source: String,
    /// ISO-8601 date the feed was produced.
    pub retrieved: String,
    /// Sorted by cve_id.
    pub records: Vec<CveRecord>,
}

impl CveCatalog {
    pub fn by_id(&self, cve_id: &str) -> Option<&CveRecord> {
        self.records
            .binary_search_by(|r| r.cve_id.as_str().cmp(cve_id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedFile {
    source: String,
    retrieved: String,
    records: Vec<CveRecord>,
}

fn valid_cve_id(id: &str) -> bool {
    let Some(rest) = id.strip_prefix("CVE-") else {
        return false;
    };
    let Some((year, seq)) = rest.split_once('-') else {
        return false;
    };
    year.len() == 4
        && year.bytes().all(|b| b.is_ascii_digit())
        && seq.len() >= 4
        && seq.bytes().all(|b| b.is_ascii_digit())
}

/// Parse and validate a feed file; records come out sorted by cve_id.
pub fn load_feed(text: &str) -> Result<CveCatalog, NvdError> {
    let raw: FeedFile = serde_json::from_str(text).map_err(|e| NvdError::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for r in &raw.records {
        if !valid_cve_id(&r.cve_id) {
            return Err(NvdError::Parse(format!("`{}` is not a CVE id", r.cve_id)));
        }
        if !seen.insert(r.cve_id.clone()) {
            return Err(NvdError::DupCve(r.cve_id.clone()));
        }
        if let Some(s) = r.base_score {
            if !(0.0..=10.0).contains(&s) {
                return Err(NvdError::Parse(format!(
                    "base_score {s} for {} outside [0, 10]",
                    r.cve_id
                )));
            }
        }
    }
    let mut records = raw.records;
    records.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
    Ok(CveCatalog { source: raw.source, retrieved: raw.retrieved, records })
}

/// Serialize a catalog back to the feed format; `load_feed` of the result
/// reproduces the catalog exactly.
pub fn write_feed(catalog: &CveCatalog) -> String {
    let file = FeedFile {
        source: catalog.source.clone(),
        retrieved: catalog.retrieved.clone(),
        records: catalog.records.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("feed serialization cannot fail");
    text.push('\n');
    text
}

/// Case-insensitive substring search over vendor tags and descriptions,
/// results in cve_id order.
pub fn query_by_keyword<'a>(catalog: &'a CveCatalog, keyword: &str) -> Vec<&'a CveRecord> {
    let needle = keyword.to_lowercase();
    catalog
        .records
        .iter()
        .filter(|r| {
            r.description.to_lowercase().contains(&needle)
                || r.vendor_tags.iter().any(|t| t.to_lowercase().contains(&needle))
        })
        .collect()
}

/// Ties one (interaction, category) threat class to a CVE or a manual score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBinding {
    pub interaction: String,
    pub category: StrideCategory,
    pub cve_id: Option<String>,
    pub score: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBinding {
    interaction: String,
    category: String,
    #[serde(default)]
    cve_id: Option<String>,
    #[serde(default)]
    score: Option<f64>,
}

/// Parse a bindings file: JSON array of `{interaction, category, cve_id}`
/// or `{interaction, category, score}`. Each (interaction, category) pair
/// may be bound at most once.
pub fn load_bindings(text: &str) -> Result<Vec<ScoreBinding>, NvdError> {
    let raw: Vec<RawBinding> =
        serde_json::from_str(text).map_err(|e| NvdError::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for rb in raw {
        let category = StrideCategory::parse(&rb.category).ok_or_else(|| {
            NvdError::Parse(format!("unknown category `{}` in binding", rb.category))
        })?;
        match (&rb.cve_id, rb.score) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(NvdError::Parse(format!(
                    "binding ({}, {}) needs exactly one of cve_id or score",
                    rb.interaction, rb.category
                )))
            }
            (Some(id), None) if !valid_cve_id(id) => {
                return Err(NvdError::Parse(format!("`{id}` is not a CVE id")))
            }
            (None, Some(s)) if !(0.0..=10.0).contains(&s) => {
                return Err(NvdError::Parse(format!("manual score {s} outside [0, 10]")))
            }
            _ => {}
        }
        if !seen.insert((rb.interaction.clone(), category)) {
            return Err(NvdError::UnknownBinding(format!(
                "({}, {}) bound more than once",
                rb.interaction, rb.category
            )));
        }
        out.push(ScoreBinding {
            interaction: rb.interaction,
            category,
            cve_id: rb.cve_id,
            score: rb.score,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredThreat {
    pub threat: Threat,
    pub score: Option<Score>,
    /// CVE id the score came from, when it came from the catalog.
    pub via: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredThreatSet {
    pub model_name: String,
    /// Scored threats first, then unscored; canonical threat order within
    /// each half.
    pub threats: Vec<ScoredThreat>,
}

/// Attach scores to threats. Bindings hit every threat of their
/// (interaction, category) class; remaining threats score by the fallback
/// metrics when given, else stay unscored and sort last.
pub fn attach_scores(
    threats: &ThreatSet,
    catalog: &CveCatalog,
    bindings: &[ScoreBinding],
    fallback: Option<&CompositeMetrics>,
) -> Result<ScoredThreatSet, NvdError> {
    let mut by_class: BTreeMap<(&str, StrideCategory), (f64, Option<String>)> = BTreeMap::new();
    for b in bindings {
        let (value, via) = match (&b.cve_id, b.score) {
            (Some(id), None) => {
                let record = catalog.by_id(id).ok_or_else(|| {
                    NvdError::UnknownBinding(format!("{id} is not in the loaded feed"))
                })?;
                let value = record.base_score.ok_or_else(|| {
                    NvdError::UnknownBinding(format!("{id} carries no base score"))
                })?;
                (value, Some(id.clone()))
            }
            (None, Some(value)) => (value, None),
            _ => unreachable!("binding shape enforced at load"),
        };
        if !threats
            .threats
            .iter()
            .any(|t| t.interaction == b.interaction && t.category == b.category)
        {
            return Err(NvdError::UnknownBinding(format!(
                "no ({}, {}) threat to bind",
                b.interaction,
                b.category.as_str()
            )));
        }
        by_class.insert((b.interaction.as_str(), b.category), (value, via));
    }

    let fallback_score = fallback.map(score_composite);
    let mut scored = Vec::new();
    let mut unscored = Vec::new();
    for t in &threats.threats {
        match by_class.get(&(t.interaction.as_str(), t.category)) {
            Some((value, via)) => scored.push(ScoredThreat {
                threat: t.clone(),
                score: Some(Score { value: *value, method: ScoreMethod::Cvss31Base }),
                via: via.clone(),
            }),
            None => match fallback_score {
                Some(s) => {
                    scored.push(ScoredThreat { threat: t.clone(), score: Some(s), via: None })
                }
                None => unscored.push(ScoredThreat { threat: t.clone(), score: None, via: None }),
            },
        }
    }
    scored.extend(unscored);
    Ok(ScoredThreatSet { model_name: threats.model_name.clone(), threats: scored })
}

// --- online fetcher --------------------------------------------------------

#[derive(Deserialize)]
struct ApiPage {
    #[serde(rename = "resultsPerPage")]
    results_per_page: u64,
    #[serde(rename = "startIndex")]
    start_index: u64,
    #[serde(rename = "totalResults")]
    total_results: u64,
    #[serde(default)]
    vulnerabilities: Vec<ApiVulnerability>,
}

#[derive(Deserialize)]
struct ApiVulnerability {
    cve: ApiCve,
}

#[derive(Deserialize)]
struct ApiCve {
    id: String,
    #[serde(default)]
    descriptions: Vec<ApiDescription>,
    #[serde(default)]
    metrics: ApiMetrics,
}

#[derive(Deserialize)]
struct ApiDescription {
    lang: String,
    value: String,
}

#[derive(Deserialize, Default)]
struct ApiMetrics {
    #[serde(rename = "cvssMetricV31", default)]
    v31: Vec<ApiMetricV31>,
}

#[derive(Deserialize)]
struct ApiMetricV31 {
    #[serde(rename = "cvssData")]
    cvss_data: ApiCvssData,
}

#[derive(Deserialize)]
struct ApiCvssData {
    #[serde(rename = "baseScore")]
    base_score: f64,
    #[serde(rename = "vectorString")]
    vector_string: String,
}

/// Query an NVD CVE API 2.0 endpoint by keyword, page through the results,
/// and write a feed file. The whole feed is assembled in memory first, so a
/// failed fetch never leaves a partial file behind.
pub fn fetch_remote(
    endpoint: &str,
    keyword: &str,
    api_key: Option<&str>,
    out_path: &Path,
) -> Result<CveCatalog, NvdError> {
    let client = reqwest::blocking::Client::builder()
        .connect_timeout(std::time::Duration::from_secs(10))
        .timeout(std::time::Duration::from_secs(60))
        .build()
        .map_err(|e| NvdError::Network(e.to_string()))?;

    let mut records = Vec::new();
    let mut start_index: u64 = 0;
    loop {
        let mut request = client.get(endpoint).query(&[
            ("keywordSearch", keyword),
            ("resultsPerPage", "200"),
            ("startIndex", &start_index.to_string()),
        ]);
        if let Some(key) = api_key {
            request = request.header("apiKey", key);
        }
        let response = request.send().map_err(|e| NvdError::Network(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 403 {
            let retry = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .map(|v| format!(" (retry after {v}s)"))
                .unwrap_or_default();
            return Err(NvdError::RateLimited(format!("endpoint returned 403{retry}")));
        }
        if !status.is_success() {
            return Err(NvdError::BadResponse(format!("endpoint returned {status}")));
        }
        let body = response.text().map_err(|e| NvdError::Network(e.to_string()))?;
        let page: ApiPage =
            serde_json::from_str(&body).map_err(|e| NvdError::BadResponse(e.to_string()))?;

        for v in page.vulnerabilities {
            let description = v
                .cve
                .descriptions
                .iter()
                .find(|d| d.lang == "en")
                .or_else(|| v.cve.descriptions.first())
                .map(|d| d.value.clone())
                .unwrap_or_default();
            let metric = v.cve.metrics.v31.first();
            records.push(CveRecord {
                cve_id: v.cve.id,
                description,
                vendor_tags: vec![keyword.to_lowercase()],
                base_score: metric.map(|m| m.cvss_data.base_score),
                vector_string: metric.map(|m| m.cvss_data.vector_string.clone()),
            });
        }

        let fetched = page.start_index + page.results_per_page;
        if fetched >= page.total_results || page.results_per_page == 0 {
            break;
        }
        start_index = fetched;
    }

    records.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
    let catalog = CveCatalog {
        source: format!("nvd-cve-api-2.0 {endpoint}"),
        retrieved: chrono::Utc::now().format("%Y-%m-%d").to_string(),
        records,
    };
    // Validate through the same gate offline feeds pass.
    let catalog = load_feed(&write_feed(&catalog)).map_err(|e| match e {
        NvdError::Parse(m) | NvdError::DupCve(m) => NvdError::BadResponse(m),
        other => other,
    })?;
    std::fs::write(out_path, write_feed(&catalog))?;
    Ok(catalog)
}

//! Vulnerability scoring two ways: a composite base/temporal/environmental
//! formula with fixed weight tables, and the standard CVSS v3.1 base score.
//! Both produce a one-decimal value in [0, 10] plus a severity rating.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("score parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMethod {
    /// Composite base/temporal/environmental formula (see [`score_composite`]).
    Composite,
    /// Standard CVSS v3.1 base score.
    Cvss31Base,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// One decimal, 0.0–10.0.
    pub value: f64,
    pub method: ScoreMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SeverityRating {
    None,
    Low,
    Medium,
    High,
    Critical,
}

impl fmt::Display for SeverityRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeverityRating::None => "None",
            SeverityRating::Low => "Low",
            SeverityRating::Medium => "Medium",
            SeverityRating::High => "High",
            SeverityRating::Critical => "Critical",
        })
    }
}

/// Bucket a one-decimal score: None [0.0], Low [0.1–3.9], Medium [4.0–6.9],
/// High [7.0–8.9], Critical [9.0–10.0].
pub fn severity_bucket(score: f64) -> SeverityRating {
    if score < 0.05 {
        SeverityRating::None
    } else if score < 3.95 {
        SeverityRating::Low
    } else if score < 6.95 {
        SeverityRating::Medium
    } else if score < 8.95 {
        SeverityRating::High
    } else {
        SeverityRating::Critical
    }
}

fn round_half_up(x: f64) -> f64 {
    (x * 10.0 + 0.5).floor() / 10.0
}

// Level-name parsing is shared by every metric enum: comparison ignores
// case, spaces, hyphens, and underscores, so "OfficialFix", "official fix",
// and "official-fix" all work.
fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_'))
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

macro_rules! metric_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident = $weight:expr),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn weight(self) -> f64 {
                match self {
                    $($name::$variant => $weight),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                let n = normalize(s);
                $(if n == normalize(stringify!($variant)) {
                    return Some($name::$variant);
                })+
                None
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => stringify!($variant)),+
                }
            }

            pub const ALL: &'static [$name] = &[$($name::$variant),+];
        }
    };
}

metric_enum!(
    /// How the vulnerability is reached. Carried for completeness; the
    /// composite formula does not consume it.
    AccessVector { Local = 0.0, AdjacentNetwork = 0.0, Network = 0.0 }
);

metric_enum!(
    /// Difficulty of exploitation. Carried for completeness; the composite
    /// formula does not consume it.
    AccessComplexity { Low = 0.0, Medium = 0.0, High = 0.0 }
);

metric_enum!(
    /// Authentication rounds required. Carried for completeness; the
    /// composite formula does not consume it.
    Authentication { None = 0.0, Single = 0.0, Multiple = 0.0 }
);

metric_enum!(
    /// Confidentiality / integrity / availability impact level.
    CiaLevel { None = 0.0, Partial = 0.5, Complete = 1.0 }
);

metric_enum!(
    /// Base exploitability multiplier.
    Exploitability { Unproven = 0.85, ProofOfConcept = 0.9, Functional = 0.95, High = 1.0 }
);

metric_enum!(
    /// Overall impact magnitude used in the composite denominator.
    ImpactLevel { None = 0.0, Low = 0.22, Medium = 0.56, High = 0.7, Critical = 0.85 }
);

metric_enum!(
    /// Maturity of known exploit code.
    ExploitCodeMaturity { NotDefined = 0.0, Unproven = 0.9, ProofOfConcept = 0.95, Functional = 1.0, High = 1.0 }
);

metric_enum!(
    /// Availability of a fix.
    RemediationLevel { OfficialFix = 0.0, TemporaryFix = 0.25, Workaround = 0.75, Unavailable = 1.0 }
);

metric_enum!(
    /// Confidence in the vulnerability report.
    ReportConfidence { Unconfirmed = 0.0, Uncorroborated = 0.5, Confirmed = 1.0 }
);

metric_enum!(
    /// Potential for collateral damage beyond the target.
    CollateralDamage { None = 0.0, Low = 0.1, LowMedium = 0.3, MediumHigh = 0.4, High = 0.5 }
);

metric_enum!(
    /// Fraction of the environment that is vulnerable. Carried for
    /// completeness; the composite formula does not consume it.
    TargetDistribution { None = 0.0, Low = 0.25, Medium = 0.75, High = 1.0 }
);

metric_enum!(
    /// Security requirement weighting (confidentiality / integrity /
    /// availability). Carried for completeness; the composite formula does
    /// not consume it.
    Requirement { NotDefined = 0.0, Low = 0.5, Medium = 1.0, High = 1.51 }
);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseMetrics {
    pub access_vector: AccessVector,
    pub access_complexity: AccessComplexity,
    pub authentication: Authentication,
    pub confidentiality: CiaLevel,
    pub integrity: CiaLevel,
    pub availability: CiaLevel,
    pub exploitability: Exploitability,
    pub impact: ImpactLevel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalMetrics {
    pub exploit_code_maturity: ExploitCodeMaturity,
    pub remediation_level: RemediationLevel,
    pub report_confidence: ReportConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentalMetrics {
    pub collateral_damage: CollateralDamage,
    pub target_distribution: TargetDistribution,
    pub confidentiality_req: Requirement,
    pub integrity_req: Requirement,
    pub availability_req: Requirement,
}

/// Full metric selection for the composite scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeMetrics {
    pub base: BaseMetrics,
    pub temporal: TemporalMetrics,
    pub environmental: EnvironmentalMetrics,
}

impl Default for CompositeMetrics {
    /// Neutral defaults for partial CLI input: identity temporal factors,
    /// no C/I/A impact (scores 0.0 until impacts are supplied), medium
    /// overall impact so the denominator stays regular.
    fn default() -> Self {
        CompositeMetrics {
            base: BaseMetrics {
                access_vector: AccessVector::Network,
                access_complexity: AccessComplexity::Low,
                authentication: Authentication::Single,
                confidentiality: CiaLevel::None,
                integrity: CiaLevel::None,
                availability: CiaLevel::None,
                exploitability: Exploitability::High,
                impact: ImpactLevel::Medium,
            },
            temporal: TemporalMetrics {
                exploit_code_maturity: ExploitCodeMaturity::High,
                remediation_level: RemediationLevel::Unavailable,
                report_confidence: ReportConfidence::Confirmed,
            },
            environmental: EnvironmentalMetrics {
                collateral_damage: CollateralDamage::None,
                target_distribution: TargetDistribution::None,
                confidentiality_req: Requirement::NotDefined,
                integrity_req: Requirement::NotDefined,
                availability_req: Requirement::NotDefined,
            },
        }
    }
}

/// Composite score:
///
/// ```text
/// value = clamp_0_10( [ (1-(1-C)(1-I)(1-A)) * (ET*RL*RC)
///                       / ((0.6*(1-C) + 0.4*(1-CDP))*IMP + 0.6*CDP) ] * EB )
/// ```
///
/// rounded half-up to one decimal. The denominator vanishes only when both
/// CDP and IMP are None; then 0/0 scores 0.0 and k/0 saturates to 10.0.
/// AV, AC, Au, TD, CR, IR, and AR are accepted and stored but take no part
/// in the value.
pub fn score_composite(m: &CompositeMetrics) -> Score {
    let c = m.base.confidentiality.weight();
    let i = m.base.integrity.weight();
    let a = m.base.availability.weight();
    let iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);
    let temporal = m.temporal.exploit_code_maturity.weight()
        * m.temporal.remediation_level.weight()
        * m.temporal.report_confidence.weight();
    let numerator = iss * temporal;
    let cdp = m.environmental.collateral_damage.weight();
    let imp = m.base.impact.weight();
    let denominator = (0.6 * (1.0 - c) + 0.4 * (1.0 - cdp)) * imp + 0.6 * cdp;
    let raw = if denominator == 0.0 {
        if numerator == 0.0 {
            0.0
        } else {
            10.0
        }
    } else {
        (numerator / denominator) * m.base.exploitability.weight()
    };
    Score { value: round_half_up(raw.clamp(0.0, 10.0)), method: ScoreMethod::Composite }
}

/// Parse `name=Level` pairs into composite metrics over the defaults.
/// Keys: AV, AC, AU, C, I, A, E (base exploitability), IMP, ET, RL, RC,
/// CDP, TD, CR, IR, AR. Keys are case-insensitive; duplicate keys and
/// unknown keys or levels are parse errors.
pub fn parse_composite_pairs(pairs: &[String]) -> Result<CompositeMetrics, ScoreError> {
    let mut m = CompositeMetrics::default();
    let mut seen = BTreeSet::new();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| ScoreError::Parse(format!("expected name=Level, got `{pair}`")))?;
        let key_up = key.trim().to_ascii_uppercase();
        if !seen.insert(key_up.clone()) {
            return Err(ScoreError::Parse(format!("duplicate metric `{key}`")));
        }
        let value = value.trim();
        let bad = || ScoreError::Parse(format!("unknown level `{value}` for metric `{key}`"));
        match key_up.as_str() {
            "AV" => m.base.access_vector = AccessVector::parse(value).ok_or_else(bad)?,
            "AC" => m.base.access_complexity = AccessComplexity::parse(value).ok_or_else(bad)?,
            "AU" => m.base.authentication = Authentication::parse(value).ok_or_else(bad)?,
            "C" => m.base.confidentiality = CiaLevel::parse(value).ok_or_else(bad)?,
            "I" => m.base.integrity = CiaLevel::parse(value).ok_or_else(bad)?,
            "A" => m.base.availability = CiaLevel::parse(value).ok_or_else(bad)?,
            "E" | "EB" => m.base.exploitability = Exploitability::parse(value).ok_or_else(bad)?,
            "IMP" => m.base.impact = ImpactLevel::parse(value).ok_or_else(bad)?,
            "ET" => {
                m.temporal.exploit_code_maturity =
                    ExploitCodeMaturity::parse(value).ok_or_else(bad)?
            }
            "RL" => m.temporal.remediation_level = RemediationLevel::parse(value).ok_or_else(bad)?,
            "RC" => m.temporal.report_confidence = ReportConfidence::parse(value).ok_or_else(bad)?,
            "CDP" => {
                m.environmental.collateral_damage = CollateralDamage::parse(value).ok_or_else(bad)?
            }
            "TD" => {
                m.environmental.target_distribution =
                    TargetDistribution::parse(value).ok_or_else(bad)?
            }
            "CR" => m.environmental.confidentiality_req = Requirement::parse(value).ok_or_else(bad)?,
            "IR" => m.environmental.integrity_req = Requirement::parse(value).ok_or_else(bad)?,
            "AR" => m.environmental.availability_req = Requirement::parse(value).ok_or_else(bad)?,
            _ => {
                return Err(ScoreError::Parse(format!(
                    "unknown metric `{key}` (expected AV, AC, AU, C, I, A, E, IMP, ET, RL, RC, CDP, TD, CR, IR, AR)"
                )))
            }
        }
    }
    Ok(m)
}

// --- CVSS v3.1 base -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V3AttackVector {
    Network,
    Adjacent,
    Local,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V3AttackComplexity {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V3PrivilegesRequired {
    None,
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V3UserInteraction {
    None,
    Required,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V3Scope {
    Unchanged,
    Changed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V3Impact {
    None,
    Low,
    High,
}

/// The eight standard CVSS v3.1 base metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cvss31Vector {
    pub attack_vector: V3AttackVector,
    pub attack_complexity: V3AttackComplexity,
    pub privileges_required: V3PrivilegesRequired,
    pub user_interaction: V3UserInteraction,
    pub scope: V3Scope,
    pub confidentiality: V3Impact,
    pub integrity: V3Impact,
    pub availability: V3Impact,
}

/// Parse a v3.1 base vector string. The `CVSS:3.1/` prefix is optional;
/// metrics may appear in any order; all eight must be present exactly once.
pub fn parse_vector(text: &str) -> Result<Cvss31Vector, ScoreError> {
    let body = text.trim();
    let body = body.strip_prefix("CVSS:3.1/").unwrap_or(body);
    if body.starts_with("CVSS:") {
        return Err(ScoreError::Parse(format!(
            "unsupported CVSS version prefix in `{text}` (only 3.1)"
        )));
    }

    let mut av = None;
    let mut ac = None;
    let mut pr = None;
    let mut ui = None;
    let mut s = None;
    let mut c = None;
    let mut i = None;
    let mut a = None;

    fn put<T>(slot: &mut Option<T>, value: T, token: &str) -> Result<(), ScoreError> {
        if slot.is_some() {
            return Err(ScoreError::Parse(format!("duplicate metric `{token}`")));
        }
        *slot = Some(value);
        Ok(())
    }

    for token in body.split('/') {
        let (key, value) = token
            .split_once(':')
            .ok_or_else(|| ScoreError::Parse(format!("bad metric token `{token}`")))?;
        let unk = || ScoreError::Parse(format!("unknown value in token `{token}`"));
        match key {
            "AV" => put(
                &mut av,
                match value {
                    "N" => V3AttackVector::Network,
                    "A" => V3AttackVector::Adjacent,
                    "L" => V3AttackVector::Local,
                    "P" => V3AttackVector::Physical,
                    _ => return Err(unk()),
                },
                token,
            )?,
            "AC" => put(
                &mut ac,
                match value {
                    "L" => V3AttackComplexity::Low,
                    "H" => V3AttackComplexity::High,
                    _ => return Err(unk()),
                },
                token,
            )?,
            "PR" => put(
                &mut pr,
                match value {
                    "N" => V3PrivilegesRequired::None,
                    "L" => V3PrivilegesRequired::Low,
                    "H" => V3PrivilegesRequired::High,
                    _ => return Err(unk()),
                },
                token,
            )?,
            "UI" => put(
                &mut ui,
                match value {
                    "N" => V3UserInteraction::None,
                    "R" => V3UserInteraction::Required,
                    _ => return Err(unk()),
                },
                token,
            )?,
            "S" => put(
                &mut s,
                match value {
                    "U" => V3Scope::Unchanged,
                    "C" => V3Scope::Changed,
                    _ => return Err(unk()),
                },
                token,
            )?,
            "C" | "I" | "A" => {
                let level = match value {
                    "N" => V3Impact::None,
                    "L" => V3Impact::Low,
                    "H" => V3Impact::High,
                    _ => return Err(unk()),
                };
                match key {
                    "C" => put(&mut c, level, token)?,
                    "I" => put(&mut i, level, token)?,
                    _ => put(&mut a, level, token)?,
                }
            }
            _ => return Err(ScoreError::Parse(format!("unknown metric `{key}` in vector"))),
        }
    }

    let missing = |name: &str| ScoreError::Parse(format!("missing metric `{name}` in vector"));
    Ok(Cvss31Vector {
        attack_vector: av.ok_or_else(|| missing("AV"))?,
        attack_complexity: ac.ok_or_else(|| missing("AC"))?,
        privileges_required: pr.ok_or_else(|| missing("PR"))?,
        user_interaction: ui.ok_or_else(|| missing("UI"))?,
        scope: s.ok_or_else(|| missing("S"))?,
        confidentiality: c.ok_or_else(|| missing("C"))?,
        integrity: i.ok_or_else(|| missing("I"))?,
        availability: a.ok_or_else(|| missing("A"))?,
    })
}

// Official v3.1 Roundup: smallest one-decimal value >= input, with a
// float-noise guard at the fifth decimal.
fn roundup(x: f64) -> f64 {
    let int_input = (x * 100_000.0).round() as i64;
    if int_input % 10_000 == 0 {
        int_input as f64 / 100_000.0
    } else {
        ((int_input / 10_000) + 1) as f64 / 10.0
    }
}

/// Exact CVSS v3.1 base score per the published standard; matches NVD
/// for identical vectors.
pub fn score_cvss31_base(v: &Cvss31Vector) -> Score {
    let impact_weight = |l: V3Impact| -> f64 {
        match l {
            V3Impact::High => 0.56,
            V3Impact::Low => 0.22,
            V3Impact::None => 0.0,
        }
    };
    let c = impact_weight(v.confidentiality);
    let i = impact_weight(v.integrity);
    let a = impact_weight(v.availability);
    let iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);

    let changed = v.scope == V3Scope::Changed;
    let impact = if changed {
        7.52 * (iss - 0.029) - 3.25 * (iss - 0.02).powi(15)
    } else {
        6.42 * iss
    };

    let av = match v.attack_vector {
        V3AttackVector::Network => 0.85,
        V3AttackVector::Adjacent => 0.62,
        V3AttackVector::Local => 0.55,
        V3AttackVector::Physical => 0.2,
    };
    let ac = match v.attack_complexity {
        V3AttackComplexity::Low => 0.77,
        V3AttackComplexity::High => 0.44,
    };
    let pr = match (v.privileges_required, changed) {
        (V3PrivilegesRequired::None, _) => 0.85,
        (V3PrivilegesRequired::Low, false) => 0.62,
        (V3PrivilegesRequired::Low, true) => 0.68,
        (V3PrivilegesRequired::High, false) => 0.27,
        (V3PrivilegesRequired::High, true) => 0.5,
    };
    let ui = match v.user_interaction {
        V3UserInteraction::None => 0.85,
        V3UserInteraction::Required => 0.62,
    };
    let exploitability = 8.22 * av * ac * pr * ui;

    let value = if impact <= 0.0 {
        0.0
    } else if changed {
        roundup((1.08 * (impact + exploitability)).min(10.0))
    } else {
        roundup((impact + exploitability).min(10.0))
    };
    Score { value, method: ScoreMethod::Cvss31Base }
}

//! Property tests over randomly generated models, graphs, and metric
//! selections.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use threatpath::attack::{
    enumerate_paths, rank_paths, AttackGraph, AttackNode, AttackPath, AttackStep, Tactic,
    technique_slug,
};
use threatpath::data::default_rules;
use threatpath::model::{
    identify_assets, parse_model, purdue_check, render_model, trust_boundary_crossings, Element,
    ElementKind, Flow, PurdueLevel, SystemModel, TrustBoundary,
};
use threatpath::nvd::{attach_scores, load_feed, ScoreBinding};
use threatpath::report::top_n;
use threatpath::scoring::{
    score_composite, severity_bucket, CiaLevel, CollateralDamage, CompositeMetrics,
    ExploitCodeMaturity, Exploitability, ImpactLevel, RemediationLevel, ReportConfidence, Score,
    ScoreMethod, SeverityRating,
};
use threatpath::stride::{
    enumerate_threats, summarize_by_asset, summarize_by_category, StrideCategory, ThreatSet,
    STRIDE_CATEGORIES,
};

fn arb_kind() -> impl Strategy<Value = ElementKind> {
    prop_oneof![
        Just(ElementKind::Process),
        Just(ElementKind::ExternalEntity),
        Just(ElementKind::DataStore),
    ]
}

fn arb_level() -> impl Strategy<Value = PurdueLevel> {
    prop_oneof![(0i64..=5).prop_map(PurdueLevel::Numeric), Just(PurdueLevel::Dmz)]
}

#[derive(Debug, Clone)]
struct ModelSeed {
    kinds: Vec<ElementKind>,
    levels: Vec<PurdueLevel>,
    zones: Vec<Option<u8>>,
    gateways: Vec<bool>,
    flows: Vec<(usize, usize)>,
    boundaries: Vec<Vec<bool>>,
}

fn arb_seed() -> impl Strategy<Value = ModelSeed> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(arb_kind(), n),
            prop::collection::vec(arb_level(), n),
            prop::collection::vec(prop::option::of(0u8..3), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec((0..n, 0..n), 0..8),
            prop::collection::vec(prop::collection::vec(any::<bool>(), n), 0..3),
        )
            .prop_map(|(kinds, levels, zones, gateways, flows, boundaries)| ModelSeed {
                kinds,
                levels,
                zones,
                gateways,
                flows,
                boundaries,
            })
    })
}

/// Expand a seed into a well-formed model: distinct flow endpoints, unique
/// ids, non-empty boundaries only.
fn build_model(seed: &ModelSeed) -> SystemModel {
    let n = seed.kinds.len();
    let elements: Vec<Element> = (0..n)
        .map(|i| Element {
            id: format!("e{i}"),
            name: format!("Element {i}"),
            kind: seed.kinds[i],
            purdue_level: seed.levels[i],
            zone: seed.zones[i].map(|z| format!("zone{z}")),
            gateway: seed.gateways[i],
        })
        .collect();
    let mut flows = Vec::new();
    let mut seen = BTreeSet::new();
    for &(a, b) in &seed.flows {
        if a == b || !seen.insert((a, b)) {
            continue;
        }
        flows.push(Flow {
            id: format!("e{a}_to_e{b}"),
            source: format!("e{a}"),
            target: format!("e{b}"),
            protocol: None,
            data_class: None,
            self_loop: false,
        });
    }
    let boundaries: Vec<TrustBoundary> = seed
        .boundaries
        .iter()
        .enumerate()
        .filter_map(|(i, mask)| {
            let members: Vec<String> = mask
                .iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(|(j, _)| format!("e{j}"))
                .collect();
            if members.is_empty() {
                None
            } else {
                Some(TrustBoundary { id: format!("b{i}"), name: format!("Boundary {i}"), members })
            }
        })
        .collect();
    SystemModel { name: "generated".into(), elements, flows, boundaries, notes: vec![] }
}

proptest! {
    #[test]
    fn rendered_models_parse_back(seed in arb_seed()) {
        let canon = build_model(&seed).canonical();
        let text = render_model(&canon);
        let parsed = parse_model(&text).unwrap();
        prop_assert_eq!(&parsed, &canon);
        // and the writer is a fixed point
        prop_assert_eq!(render_model(&parsed), text);
    }

    #[test]
    fn assets_partition_the_elements(seed in arb_seed()) {
        let m = build_model(&seed);
        let inv = identify_assets(&m).unwrap();
        let mut collected: Vec<&String> = inv
            .external_actors
            .iter()
            .chain(&inv.processes)
            .chain(&inv.data_stores)
            .collect();
        collected.sort();
        let mut expected: Vec<&String> = m.elements.iter().map(|e| &e.id).collect();
        expected.sort();
        prop_assert_eq!(collected, expected);
        prop_assert_eq!(inv.flows.len(), m.flows.len());
        let flow_ids: BTreeSet<&String> = m.flows.iter().map(|f| &f.id).collect();
        prop_assert!(inv.interfaces.iter().all(|i| flow_ids.contains(i)));
    }

    #[test]
    fn crossings_vanish_without_boundaries(seed in arb_seed()) {
        let mut m = build_model(&seed);
        let crossings = trust_boundary_crossings(&m);
        let flow_ids: BTreeSet<&String> = m.flows.iter().map(|f| &f.id).collect();
        prop_assert!(crossings.iter().all(|c| flow_ids.contains(c)));
        m.boundaries.clear();
        prop_assert!(trust_boundary_crossings(&m).is_empty());
    }

    #[test]
    fn purdue_findings_ignore_declaration_order(seed in arb_seed()) {
        let m = build_model(&seed);
        let mut shuffled = m.clone();
        shuffled.elements.reverse();
        shuffled.flows.reverse();
        prop_assert_eq!(purdue_check(&m), purdue_check(&shuffled));
        prop_assert_eq!(purdue_check(&m), purdue_check(&m.canonical()));
    }

    #[test]
    fn threat_totals_conserve_and_attribute(seed in arb_seed()) {
        let m = build_model(&seed);
        let rules = default_rules().unwrap();
        let ts = enumerate_threats(&m, &rules).unwrap();
        let by_cat: usize = summarize_by_category(&ts).iter().map(|(_, c)| c).sum();
        let by_asset: usize = summarize_by_asset(&ts).iter().map(|(_, c)| c).sum();
        prop_assert_eq!(by_cat, ts.threats.len());
        prop_assert_eq!(by_asset, ts.threats.len());
        for t in &ts.threats {
            let flow = m.flow(&t.interaction).unwrap();
            let expected = if t.category == StrideCategory::Spoofing {
                &flow.source
            } else {
                &flow.target
            };
            prop_assert_eq!(&t.attributed_asset, expected);
        }
    }

    #[test]
    fn extra_flows_never_reduce_threats(seed in arb_seed(), extra_source in 0usize..6) {
        let m = build_model(&seed);
        let rules = default_rules().unwrap();
        let before = enumerate_threats(&m, &rules).unwrap().threats.len();
        let mut extended = m.clone();
        let a = extra_source % m.elements.len();
        let b = (extra_source + 1) % m.elements.len();
        if a != b && m.flow(&format!("e{a}_to_e{b}")).is_none() {
            extended.flows.push(Flow {
                id: format!("e{a}_to_e{b}"),
                source: format!("e{a}"),
                target: format!("e{b}"),
                protocol: None,
                data_class: None,
                self_loop: false,
            });
        }
        let after = enumerate_threats(&extended, &rules).unwrap().threats.len();
        prop_assert!(after >= before);
    }
}

fn arb_composite() -> impl Strategy<Value = CompositeMetrics> {
    (
        prop::sample::select(CiaLevel::ALL),
        prop::sample::select(CiaLevel::ALL),
        prop::sample::select(CiaLevel::ALL),
        prop::sample::select(Exploitability::ALL),
        prop::sample::select(ImpactLevel::ALL),
        prop::sample::select(ExploitCodeMaturity::ALL),
        prop::sample::select(RemediationLevel::ALL),
        prop::sample::select(ReportConfidence::ALL),
        prop::sample::select(CollateralDamage::ALL),
    )
        .prop_map(|(c, i, a, eb, imp, et, rl, rc, cdp)| {
            let mut m = CompositeMetrics::default();
            m.base.confidentiality = c;
            m.base.integrity = i;
            m.base.availability = a;
            m.base.exploitability = eb;
            m.base.impact = imp;
            m.temporal.exploit_code_maturity = et;
            m.temporal.remediation_level = rl;
            m.temporal.report_confidence = rc;
            m.environmental.collateral_damage = cdp;
            m
        })
}

proptest! {
    #[test]
    fn composite_stays_in_range_at_one_decimal(m in arb_composite()) {
        let v = score_composite(&m).value;
        prop_assert!((0.0..=10.0).contains(&v));
        prop_assert_eq!((v * 10.0).round() / 10.0, v);
        // severity is total over the whole range
        let _ = severity_bucket(v);
    }

    #[test]
    fn composite_zero_factors_absorb(m in arb_composite()) {
        let mut zeroed = m;
        zeroed.temporal.remediation_level = RemediationLevel::OfficialFix;
        prop_assert_eq!(score_composite(&zeroed).value, 0.0);
        zeroed = m;
        zeroed.temporal.exploit_code_maturity = ExploitCodeMaturity::NotDefined;
        prop_assert_eq!(score_composite(&zeroed).value, 0.0);
        zeroed = m;
        zeroed.temporal.report_confidence = ReportConfidence::Unconfirmed;
        prop_assert_eq!(score_composite(&zeroed).value, 0.0);
        zeroed = m;
        zeroed.base.confidentiality = CiaLevel::None;
        zeroed.base.integrity = CiaLevel::None;
        zeroed.base.availability = CiaLevel::None;
        prop_assert_eq!(score_composite(&zeroed).value, 0.0);
    }

    #[test]
    fn composite_rises_with_each_upgradeable_factor(m in arb_composite()) {
        let base = score_composite(&m).value;
        for &level in CiaLevel::ALL {
            if level.weight() >= m.base.confidentiality.weight() {
                let mut up = m;
                up.base.confidentiality = level;
                prop_assert!(score_composite(&up).value >= base);
            }
        }
        for &level in ExploitCodeMaturity::ALL {
            if level.weight() >= m.temporal.exploit_code_maturity.weight() {
                let mut up = m;
                up.temporal.exploit_code_maturity = level;
                prop_assert!(score_composite(&up).value >= base);
            }
        }
        for &level in RemediationLevel::ALL {
            if level.weight() >= m.temporal.remediation_level.weight() {
                let mut up = m;
                up.temporal.remediation_level = level;
                prop_assert!(score_composite(&up).value >= base);
            }
        }
        for &level in Exploitability::ALL {
            if level.weight() >= m.base.exploitability.weight() {
                let mut up = m;
                up.base.exploitability = level;
                prop_assert!(score_composite(&up).value >= base);
            }
        }
    }

    #[test]
    fn severity_is_monotone(a in 0u32..=100, b in 0u32..=100) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(
            severity_bucket(lo as f64 / 10.0) <= severity_bucket(hi as f64 / 10.0)
        );
    }
}

#[derive(Debug, Clone)]
struct GraphSeed {
    columns: Vec<usize>,
    elements: Vec<usize>,
    edge_mask: Vec<bool>,
}

fn arb_graph_seed() -> impl Strategy<Value = GraphSeed> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..4, n),
            prop::collection::vec(0usize..3, n),
            prop::collection::vec(any::<bool>(), n * n),
        )
            .prop_map(|(columns, elements, edge_mask)| GraphSeed { columns, elements, edge_mask })
    })
}

/// Random graph whose edges all point rightward (or sideways) in column
/// order, as built graphs do.
fn build_graph(seed: &GraphSeed) -> AttackGraph {
    let n = seed.columns.len();
    let nodes: Vec<AttackNode> = (0..n)
        .map(|i| AttackNode {
            element: format!("e{}", seed.elements[i]),
            tactic: format!("T{}", seed.columns[i]),
            column_index: seed.columns[i],
            technique_id: format!("tech-{i}"),
            technique: format!("Tech {i}"),
            threats: vec![],
        })
        .collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && seed.edge_mask[u * n + v] && seed.columns[v] >= seed.columns[u] {
                edges.push((u, v));
            }
        }
    }
    AttackGraph::from_parts(nodes, &edges)
}

proptest! {
    #[test]
    fn enumerated_paths_are_simple_monotone_and_ranked(seed in arb_graph_seed()) {
        let g = build_graph(&seed);
        let entry = Tactic { name: "T0".into(), column_index: 0 };
        let goal = Tactic { name: "T3".into(), column_index: 3 };
        let paths = enumerate_paths(&g, &entry, &goal, 6, usize::MAX).unwrap();
        let mut last_score = f64::INFINITY;
        for p in &paths {
            prop_assert!(p.steps.len() >= 2 && p.steps.len() <= 6);
            prop_assert_eq!(p.steps.first().unwrap().tactic.as_str(), "T0");
            prop_assert_eq!(p.steps.last().unwrap().tactic.as_str(), "T3");
            prop_assert_eq!(p.goal.as_str(), "T3");
            let mut seen = BTreeSet::new();
            for w in p.steps.windows(2) {
                prop_assert!(w[0].column_index <= w[1].column_index);
            }
            for s in &p.steps {
                prop_assert!(seen.insert(s.step_id()));
            }
            prop_assert!(p.path_score <= last_score);
            last_score = p.path_score;
        }
    }

    #[test]
    fn appending_a_step_only_lowers_the_product(
        values in prop::collection::vec(0.0f64..=10.0, 1..5),
        appended in 0.0f64..10.0,
    ) {
        fn path_of(values: &[f64]) -> AttackPath {
            let steps = values
                .iter()
                .enumerate()
                .map(|(i, &v)| AttackStep {
                    element: "e".into(),
                    tactic: format!("T{i}"),
                    column_index: i,
                    technique_id: technique_slug(&format!("Tech {i}")),
                    technique: format!("Tech {i}"),
                    threat: None,
                    cwe_note: None,
                    score: Some(Score { value: v, method: ScoreMethod::Cvss31Base }),
                })
                .collect();
            AttackPath { goal: "g".into(), steps, path_score: 0.0 }
        }
        let base = rank_paths(vec![path_of(&values)], &BTreeMap::new())[0].path_score;

        let mut longer = values.clone();
        longer.push(appended);
        let grown = rank_paths(vec![path_of(&longer)], &BTreeMap::new())[0].path_score;
        if base > 0.0 {
            prop_assert!(grown < base);
        } else {
            prop_assert_eq!(grown, 0.0);
        }

        let mut same = values.clone();
        same.push(10.0);
        let unchanged = rank_paths(vec![path_of(&same)], &BTreeMap::new())[0].path_score;
        prop_assert!((unchanged - base).abs() < 1e-9);
    }
}

fn arb_threat_set() -> impl Strategy<Value = ThreatSet> {
    prop::collection::vec((0usize..6, 0usize..4, 0usize..3), 1..20).prop_map(|tuples| {
        let mut threats = Vec::new();
        let mut seen = BTreeSet::new();
        for (cat, flow, rule) in tuples {
            let category = STRIDE_CATEGORIES[cat];
            let id = format!("r{rule}:f{flow}:{}", category.as_str());
            if !seen.insert(id.clone()) {
                continue;
            }
            threats.push(threatpath::stride::Threat {
                threat_id: id,
                rule_id: format!("r{rule}"),
                category,
                interaction: format!("f{flow}"),
                attributed_asset: format!("e{}", flow % 3),
                title: String::new(),
                description: String::new(),
            });
        }
        ThreatSet { model_name: "m".into(), threats }
    })
}

proptest! {
    #[test]
    fn attaching_scores_preserves_threats_and_partitions(
        ts in arb_threat_set(),
        picks in prop::collection::vec((0usize..20, 0.0f64..=10.0), 0..6),
    ) {
        let catalog = load_feed(r#"{"source": "s", "retrieved": "d", "records": []}"#).unwrap();
        let mut bindings: Vec<ScoreBinding> = Vec::new();
        let mut seen = BTreeSet::new();
        for (pick, value) in picks {
            let t = &ts.threats[pick % ts.threats.len()];
            if seen.insert((t.interaction.clone(), t.category)) {
                bindings.push(ScoreBinding {
                    interaction: t.interaction.clone(),
                    category: t.category,
                    cve_id: None,
                    score: Some((value * 10.0).round() / 10.0),
                });
            }
        }
        let scored = attach_scores(&ts, &catalog, &bindings, None).unwrap();
        prop_assert_eq!(scored.threats.len(), ts.threats.len());
        let first_unscored =
            scored.threats.iter().position(|t| t.score.is_none()).unwrap_or(scored.threats.len());
        prop_assert!(scored.threats[..first_unscored].iter().all(|t| t.score.is_some()));
        prop_assert!(scored.threats[first_unscored..].iter().all(|t| t.score.is_none()));
        // identity preserved
        let mut original: Vec<&str> = ts.threats.iter().map(|t| t.threat_id.as_str()).collect();
        let mut returned: Vec<&str> =
            scored.threats.iter().map(|t| t.threat.threat_id.as_str()).collect();
        original.sort_unstable();
        returned.sort_unstable();
        prop_assert_eq!(original, returned);

        // top rows never increase and never repeat a class
        let rows = top_n(&scored, 10);
        let mut classes = BTreeSet::new();
        let mut last = f64::INFINITY;
        for row in &rows {
            prop_assert!(row.score <= last);
            last = row.score;
            prop_assert!(classes.insert((row.category, row.interaction.clone())));
        }
    }
}

#[test]
fn severity_covers_every_tenth() {
    let expected = |i: u32| match i {
        0 => SeverityRating::None,
        1..=39 => SeverityRating::Low,
        40..=69 => SeverityRating::Medium,
        70..=89 => SeverityRating::High,
        _ => SeverityRating::Critical,
    };
    for i in 0..=100 {
        assert_eq!(severity_bucket(i as f64 / 10.0), expected(i), "at {}", i as f64 / 10.0);
    }
}

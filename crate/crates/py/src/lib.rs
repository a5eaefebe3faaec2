//! Python bindings: a thin layer over the threatpath engine exposing model
//! parsing and validation, threat enumeration, attack-path analysis, and
//! both scorers. Collections cross the boundary as plain dicts, lists, and
//! tuples so callers need no Rust-side vocabulary.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use threatpath::attack::{build_attack_graph, enumerate_paths, rank_paths};
use threatpath::data::{default_mapping, default_matrix, default_rules};
use threatpath::model::{
    identify_assets, parse_model, purdue_check, trust_boundary_crossings, validate_model,
    SystemModel,
};
use threatpath::scoring::{
    parse_composite_pairs, parse_vector, score_composite, score_cvss31_base, severity_bucket,
};
use threatpath::stride::{
    enumerate_threats, load_rules, render_threats_json, render_threats_markdown,
    summarize_by_asset, summarize_by_category, ThreatSet,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A parsed system model.
#[pyclass(frozen, name = "Model")]
struct Model {
    inner: SystemModel,
}

#[pymethods]
impl Model {
    /// Parse a model from its JSON text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Model> {
        Ok(Model { inner: parse_model(text).map_err(value_error)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn element_ids(&self) -> Vec<String> {
        self.inner.elements.iter().map(|e| e.id.clone()).collect()
    }

    fn flow_ids(&self) -> Vec<String> {
        self.inner.flows.iter().map(|f| f.id.clone()).collect()
    }

    /// Structural findings as display strings; empty means the model is valid.
    fn validate(&self) -> Vec<String> {
        validate_model(&self.inner).iter().map(|i| i.to_string()).collect()
    }

    /// Reference-architecture level findings (advisory, not validity).
    fn purdue_findings(&self) -> Vec<String> {
        purdue_check(&self.inner).iter().map(|i| i.to_string()).collect()
    }

    /// Flow ids that cross a trust boundary.
    fn boundary_crossings(&self) -> Vec<String> {
        trust_boundary_crossings(&self.inner)
    }

    /// Asset inventory as a dict of id lists keyed by asset class.
    fn assets<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let inventory = identify_assets(&self.inner).map_err(value_error)?;
        let dict = PyDict::new(py);
        dict.set_item("external_actors", inventory.external_actors)?;
        dict.set_item("processes", inventory.processes)?;
        dict.set_item("data_stores", inventory.data_stores)?;
        dict.set_item("flows", inventory.flows)?;
        dict.set_item("interfaces", inventory.interfaces)?;
        Ok(dict)
    }

    /// Enumerate STRIDE threats, with the bundled rules unless `rules_json`
    /// is given.
    #[pyo3(signature = (rules_json = None))]
    fn threats(&self, rules_json: Option<&str>) -> PyResult<Threats> {
        let rules = match rules_json {
            Some(text) => load_rules(text).map_err(value_error)?,
            None => default_rules().map_err(value_error)?,
        };
        let set = enumerate_threats(&self.inner, &rules).map_err(value_error)?;
        Ok(Threats { inner: set })
    }

    /// Ranked attack paths as dicts with `goal`, `score`, and `steps`
    /// (each step a dict with `element`, `technique`, `tactic`).
    #[pyo3(signature = (entry = "Initial Access", goal = "Impact", max_len = 3, top = 3))]
    fn attack_paths<'py>(
        &self,
        py: Python<'py>,
        entry: &str,
        goal: &str,
        max_len: usize,
        top: usize,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let rules = default_rules().map_err(value_error)?;
        let matrix = default_matrix().map_err(value_error)?;
        let mapping = default_mapping().map_err(value_error)?;
        let threats = enumerate_threats(&self.inner, &rules).map_err(value_error)?;
        let graph =
            build_attack_graph(&self.inner, &threats, &matrix, &mapping).map_err(value_error)?;
        let entry = matrix.tactic(entry).map_err(value_error)?;
        let goal = matrix.tactic(goal).map_err(value_error)?;
        let ranked = rank_paths(
            enumerate_paths(&graph, entry, goal, max_len, top).map_err(value_error)?,
            &BTreeMap::new(),
        );

        let mut out = Vec::with_capacity(ranked.len());
        for path in &ranked {
            let record = PyDict::new(py);
            record.set_item("goal", &path.goal)?;
            record.set_item("score", path.path_score)?;
            let steps: Vec<Bound<'py, PyDict>> = path
                .steps
                .iter()
                .map(|step| {
                    let item = PyDict::new(py);
                    item.set_item("element", &step.element)?;
                    item.set_item("technique", &step.technique)?;
                    item.set_item("tactic", &step.tactic)?;
                    Ok(item)
                })
                .collect::<PyResult<_>>()?;
            record.set_item("steps", steps)?;
            out.push(record);
        }
        Ok(out)
    }
}

/// An enumerated threat set.
#[pyclass(frozen, name = "Threats")]
struct Threats {
    inner: ThreatSet,
}

#[pymethods]
impl Threats {
    fn __len__(&self) -> usize {
        self.inner.threats.len()
    }

    /// Threat counts per STRIDE category (snake_case keys).
    fn by_category(&self) -> BTreeMap<String, usize> {
        summarize_by_category(&self.inner)
            .into_iter()
            .map(|(category, count)| (category.as_str().to_string(), count))
            .collect()
    }

    /// Threat counts per attributed asset.
    fn by_asset(&self) -> BTreeMap<String, usize> {
        summarize_by_asset(&self.inner).into_iter().collect()
    }

    /// Threat ids in canonical order.
    fn ids(&self) -> Vec<String> {
        self.inner.threats.iter().map(|t| t.threat_id.clone()).collect()
    }

    fn to_json(&self) -> String {
        render_threats_json(&self.inner)
    }

    fn to_markdown(&self) -> String {
        render_threats_markdown(&self.inner)
    }
}

/// Score a CVSS v3.1 base vector; returns `(value, severity)`.
#[pyfunction]
fn score_vector(vector: &str) -> PyResult<(f64, String)> {
    let parsed = parse_vector(vector).map_err(value_error)?;
    let score = score_cvss31_base(&parsed);
    Ok((score.value, severity_bucket(score.value).to_string()))
}

/// Score composite metrics given as `NAME=LEVEL` strings; returns
/// `(value, severity)`. Omitted metrics take the documented defaults.
#[pyfunction]
fn score_metrics(pairs: Vec<String>) -> PyResult<(f64, String)> {
    let metrics = parse_composite_pairs(&pairs).map_err(value_error)?;
    let score = score_composite(&metrics);
    Ok((score.value, severity_bucket(score.value).to_string()))
}

/// The bundled tactic matrix as ordered `(tactic, technique_count)` pairs.
#[pyfunction]
fn matrix_summary() -> PyResult<Vec<(String, usize)>> {
    let matrix = default_matrix().map_err(value_error)?;
    Ok(matrix
        .tactics
        .iter()
        .map(|t| (t.name.clone(), matrix.techniques_in(&t.name).len()))
        .collect())
}

#[pymodule]
fn threatpath_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Threats>()?;
    m.add_function(wrap_pyfunction!(score_vector, m)?)?;
    m.add_function(wrap_pyfunction!(score_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(matrix_summary, m)?)?;
    Ok(())
}

//! Threat modeling and attack path analysis for industrial control systems.
//!
//! The pipeline runs in six stages over a declarative system model:
//! parse and validate the model ([`model`]), identify assets and boundary
//! crossings, enumerate STRIDE threats with a data-driven rule set
//! ([`stride`]), map threats onto ATT&CK-for-ICS techniques and enumerate
//! ranked attack paths ([`attack`]), score findings ([`scoring`]) with
//! optional CVE enrichment from an offline NVD-derived feed ([`nvd`]), and
//! render prioritized Markdown/JSON reports ([`report`]).

pub mod attack;
pub mod data;
pub mod model;
pub mod nvd;
pub mod report;
pub mod scoring;
pub mod stride;

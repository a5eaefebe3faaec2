//! Bundled data files: the default STRIDE rule set, the ATT&CK-for-ICS
//! tactic/technique matrix, and the default STRIDE-to-technique mapping.
//! All three are plain JSON so analysts can retune them without rebuilding;
//! every consumer accepts an override path on the CLI.

use crate::attack::{load_attack_matrix, load_mapping, AttackError, AttackMatrix, MappingTable};
use crate::stride::{load_rules, RuleSet, StrideError};

pub const DEFAULT_RULES_JSON: &str = include_str!("../data/default_rules.json");
pub const ATTACK_MATRIX_JSON: &str = include_str!("../data/attack_matrix.json");
pub const STRIDE_MAPPING_JSON: &str = include_str!("../data/stride_mapping.json");

pub fn default_rules() -> Result<RuleSet, StrideError> {
    load_rules(DEFAULT_RULES_JSON)
}

pub fn default_matrix() -> Result<AttackMatrix, AttackError> {
    load_attack_matrix(ATTACK_MATRIX_JSON)
}

pub fn default_mapping() -> Result<MappingTable, AttackError> {
    load_mapping(STRIDE_MAPPING_JSON, &default_matrix()?)
}

//! Fuzzy linguistic rules distilled from local feature importances.

mod membership;
mod rules;

pub use membership::{argmax_set, fuzzify, FuzzySet};
pub use rules::{extract_rules, render_rules, rules_csv, FuzzyConfig, LinguisticRule, RuleInput, NO_RULES};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("feature range is degenerate (min {min} ≥ max {max})")]
    DegenerateRange { min: f64, max: f64 },
    #[error("no local importances for method `{0}`")]
    NoLocalImportances(String),
    #[error("no rule reached support {0}")]
    NoRulesAboveSupport(usize),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = FuzzyError> = std::result::Result<T, E>;

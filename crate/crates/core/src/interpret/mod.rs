//! Model-agnostic feature importance: permutation importance, Kernel SHAP
//! with an exact Shapley oracle, LIME, and ensemble fusion.

mod config;
mod lime;
mod permutation;
mod shapley;
mod stage;
mod tensor;

pub use config::{EnsembleMethods, GlobalMethods, ImportanceConfig, LocalMethods};
pub use lime::lime_explain;
pub use permutation::{permutation_importance, PermutationResult, Scoring};
pub use shapley::{exact_shapley, global_shap, kernel_shap, sample_background, ShapExplanation};
pub use stage::{run_interpretation, FiOutput};
pub use tensor::{fuse_majority_vote, fuse_mean, ImportanceTensor, Normalisation, Scope, Slice, Vote};

use crate::learners::LearnError;
use crate::matrix::Matrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretError {
    #[error("unknown scoring `{0}`")]
    UnknownScoring(String),
    #[error("exact Shapley enumeration supports at most 12 features, got {0}")]
    TooManyFeatures(usize),
    #[error("the sampled coalitions do not determine the attributions")]
    DegenerateSystem,
    #[error("every LIME sample has negligible kernel weight")]
    DegenerateKernel,
    #[error("importance tensor has no slices")]
    EmptyTensor,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] LearnError),
}

pub type Result<T, E = InterpretError> = std::result::Result<T, E>;

/// Batch model output: one scalar per row.
pub type Predictor<'a> = dyn Fn(&Matrix) -> std::result::Result<Vec<f64>, LearnError> + Sync + 'a;

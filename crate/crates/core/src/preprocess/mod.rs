//! Fitted, serialisable preprocessing: feature normalisation, target
//! transforms and feature selection, composed into a replayable pipeline.
//!
//! Variances and standard deviations are population (divide-by-n) values
//! throughout.

mod lasso;
mod normalise;
mod pipeline;
mod selection;
mod target;

pub use lasso::{lasso_coordinate_descent, lasso_lambda_max, select_by_lasso, LassoFit, LassoOptions};
pub use normalise::{fit_normalisation, FeatureNormalisation, NormalisationKind};
pub use pipeline::{build_pipeline, PipelineStep, PreprocessConfig, TransformPipeline, PIPELINE_VERSION};
pub use selection::{select_by_correlation, select_by_variance, SelectionConfig};
pub use target::{fit_target_transform, TargetTransform, TargetTransformKind};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("column `{0}` is constant; standardisation needs a positive standard deviation")]
    ConstantColumn(String),
    #[error("column `{0}` has zero range; min-max scaling is undefined")]
    ZeroRange(String),
    #[error("log transform needs strictly positive targets (found {0})")]
    NonPositiveTarget(f64),
    #[error("square-root transform needs non-negative targets (found {0})")]
    NegativeTarget(f64),
    #[error("feature selection removed every feature")]
    AllFeaturesDropped,
    #[error("coordinate descent did not converge after {sweeps} sweeps (last change {last_delta:e})")]
    DidNotConverge { sweeps: usize, last_delta: f64 },
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid preprocessing configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = PreprocessError> = std::result::Result<T, E>;

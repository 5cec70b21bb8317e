//! The learner abstraction, six model families, metrics, grid search and the
//! training stage that ties them to splits and preprocessing.

mod boosting;
mod forest;
mod grid;
mod linear;
mod logistic;
mod metrics;
mod mlrem;
mod params;
mod svm;
mod train;
mod tree;

pub use boosting::GradientBoosting;
pub use forest::RandomForest;
pub use grid::{expand_grid, grid_search, Candidate, GridResult, ModelSpec};
pub use linear::LinearRegression;
pub use logistic::LogisticRegression;
pub use metrics::{
    classification_metrics, regression_metrics, roc_auc, roc_curve, MetricSet, MetricSummary, Metrics,
};
pub use mlrem::Mlrem;
pub use params::{ModelFamily, ParamValue, Params};
pub use svm::{Kernel, Svm};
pub use train::{
    predict_unseen, train_models, PredictionTable, SplitMetrics, TrainOptions, TrainOutput, TrainedModel,
};
pub use tree::{Criterion, Tree, TreeParams};

use crate::matrix::Matrix;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("model has not been fitted")]
    NotFitted,
    #[error("design matrix is rank deficient; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("need more rows than features (n = {n}, d = {d})")]
    TooFewRows { n: usize, d: usize },
    #[error("classes are perfectly separable; weights diverge without an l2 penalty")]
    PerfectSeparation,
    #[error("family `{family}` does not support {task}")]
    UnsupportedTask { family: String, task: String },
    #[error("unknown parameter `{name}` for `{family}`")]
    UnknownParam { family: String, name: String },
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("expected {expected} features, got {found}")]
    FeatureCountMismatch { expected: usize, found: usize },
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error("model `{0}` not found")]
    ModelNotFound(String),
    #[error("{0}")]
    Split(String),
    #[error("{0}")]
    Preprocess(String),
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

impl Task {
    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Task::Regression => 0,
            Task::Classification { n_classes } => *n_classes,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification { .. } => "classification",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub supports_classification: bool,
    pub supports_regression: bool,
    pub exposes_coefficients: bool,
}

/// Linear coefficients for one output (one per class under one-vs-rest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

/// Diagnostics from a fit that completed, possibly without converging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitReport {
    fn ok(iterations: usize) -> Self {
        Self { converged: true, iterations, warnings: Vec::new() }
    }

    fn merge(&mut self, other: FitReport) {
        self.converged &= other.converged;
        self.iterations = self.iterations.max(other.iterations);
        for w in other.warnings {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }
}

/// Classification targets are class indices stored as f64; `predict`
/// returns indices the same way.
pub trait Learner {
    fn family(&self) -> ModelFamily;
    fn params(&self) -> Params;
    fn capabilities(&self) -> Capabilities;
    fn fit(&mut self, x: &Matrix, y: &[f64], task: Task, rng: &mut Rng) -> Result<FitReport>;
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;
    fn coefficients(&self) -> Option<Vec<Coefficients>> {
        None
    }
}

/// Any fitted or unfitted learner; serialises with its fitted state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "state", rename_all = "snake_case")]
pub enum Model {
    LinearRegression(LinearRegression),
    Mlrem(Mlrem),
    LogisticRegression(LogisticRegression),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
    Svm(Svm),
}

impl Model {
    pub fn new(family: ModelFamily, params: &Params) -> Result<Self> {
        params::check_names(family, params)?;
        Ok(match family {
            ModelFamily::LinearRegression => Model::LinearRegression(LinearRegression::default()),
            ModelFamily::Mlrem => Model::Mlrem(Mlrem::from_params(params)?),
            ModelFamily::LogisticRegression => Model::LogisticRegression(LogisticRegression::from_params(params)?),
            ModelFamily::RandomForest => Model::RandomForest(RandomForest::from_params(params)?),
            ModelFamily::GradientBoosting => Model::GradientBoosting(GradientBoosting::from_params(params)?),
            ModelFamily::Svm => Model::Svm(Svm::from_params(params)?),
        })
    }

    fn inner(&self) -> &dyn Learner {
        match self {
            Model::LinearRegression(m) => m,
            Model::Mlrem(m) => m,
            Model::LogisticRegression(m) => m,
            Model::RandomForest(m) => m,
            Model::GradientBoosting(m) => m,
            Model::Svm(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Learner {
        match self {
            Model::LinearRegression(m) => m,
            Model::Mlrem(m) => m,
            Model::LogisticRegression(m) => m,
            Model::RandomForest(m) => m,
            Model::GradientBoosting(m) => m,
            Model::Svm(m) => m,
        }
    }

    /// Scalar model output used by explainers: the prediction for regression,
    /// the probability of `class` for classification.
    pub fn output(&self, x: &Matrix, class: Option<usize>) -> Result<Vec<f64>> {
        match class {
            None => self.predict(x),
            Some(c) => Ok(self.predict_proba(x)?.column(c)),
        }
    }
}

impl Learner for Model {
    fn family(&self) -> ModelFamily {
        self.inner().family()
    }
    fn params(&self) -> Params {
        self.inner().params()
    }
    fn capabilities(&self) -> Capabilities {
        self.inner().capabilities()
    }
    fn fit(&mut self, x: &Matrix, y: &[f64], task: Task, rng: &mut Rng) -> Result<FitReport> {
        let caps = self.capabilities();
        let ok = match task {
            Task::Regression => caps.supports_regression,
            Task::Classification { .. } => caps.supports_classification,
        };
        if !ok {
            return Err(LearnError::UnsupportedTask { family: self.family().as_str().into(), task: task.name().into() });
        }
        if x.nrows() != y.len() || x.nrows() == 0 {
            return Err(LearnError::InvalidParam { name: "y".into(), reason: "length must match X rows".into() });
        }
        self.inner_mut().fit(x, y, task, rng)
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.inner().predict(x)
    }
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.inner().predict_proba(x)
    }
    fn coefficients(&self) -> Option<Vec<Coefficients>> {
        self.inner().coefficients()
    }
}

fn check_width(expected: usize, x: &Matrix) -> Result<()> {
    if x.ncols() != expected {
        return Err(LearnError::FeatureCountMismatch { expected, found: x.ncols() });
    }
    Ok(())
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Predicted class indices from a probability matrix.
fn classes_from_proba(p: &Matrix) -> Vec<f64> {
    p.rows_iter().map(|r| argmax(r) as f64).collect()
}

/// Normalise one-vs-rest scores to rows summing to one.
fn normalise_rows(scores: Vec<Vec<f64>>) -> Matrix {
    let rows: Vec<Vec<f64>> = scores
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / r.len() as f64; r.len()]
            }
        })
        .collect();
    Matrix::from_rows(&rows)
}

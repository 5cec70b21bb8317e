use super::{PreprocessError, Result};
use crate::matrix::{mean_sd, pearson, Matrix};
use serde::{Deserialize, Serialize};

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.1;
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.8;
pub const DEFAULT_LASSO_LAMBDA: f64 = 0.05;

/// Which selection filters run; they always run in the order
/// variance, correlation, LASSO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub use_variance: bool,
    pub variance_threshold: f64,
    pub use_correlation: bool,
    pub correlation_threshold: f64,
    pub use_lasso: bool,
    pub lasso_lambda: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            use_variance: false,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            use_correlation: false,
            correlation_threshold: DEFAULT_CORRELATION_THRESHOLD,
            use_lasso: false,
            lasso_lambda: DEFAULT_LASSO_LAMBDA,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold >= 0.0) {
            return Err(PreprocessError::InvalidConfig("variance_threshold must be >= 0".into()));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(PreprocessError::InvalidConfig("correlation_threshold must be in (0, 1]".into()));
        }
        if !(self.lasso_lambda > 0.0) {
            return Err(PreprocessError::InvalidConfig("lasso_lambda must be > 0".into()));
        }
        Ok(())
    }
}

/// Keeps columns whose population variance on the raw values is at least
/// `threshold`. Returns surviving column indices in order.
pub fn select_by_variance(x: &Matrix, threshold: f64) -> Result<Vec<usize>> {
    let keep: Vec<usize> = (0..x.ncols())
        .filter(|&j| {
            let (_, sd) = mean_sd(&x.column(j));
            !(sd * sd < threshold)
        })
        .collect();
    if keep.is_empty() {
        return Err(PreprocessError::AllFeaturesDropped);
    }
    Ok(keep)
}

/// Greedy scan in column order: a column is dropped when its |Pearson r|
/// with an already kept column exceeds `threshold`. The first column
/// always survives. Constant columns correlate with nothing.
pub fn select_by_correlation(x: &Matrix, threshold: f64) -> Vec<usize> {
    let cols = x.columns();
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..cols.len() {
        let clashes = keep
            .iter()
            .any(|&i| pearson(&cols[i], &cols[j]).is_some_and(|r| r.abs() > threshold));
        if !clashes {
            keep.push(j);
        }
    }
    keep
}

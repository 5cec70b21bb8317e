use super::params::ModelFamily;
use super::{check_width, Capabilities, Coefficients, FitReport, LearnError, Learner, Params, Result, Task};
use crate::matrix::Matrix;
use crate::rng::Rng;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative size of |R_jj| below which a column counts as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares with intercept, solved by QR.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRegression {
    pub fitted: Option<Coefficients>,
}

/// Least squares with an intercept column. Collinear feature indices are
/// reported as their 0-based positions.
pub(super) fn ols(x: &Matrix, y: &[f64]) -> Result<Coefficients> {
    let (n, d) = (x.nrows(), x.ncols());
    if n <= d {
        return Err(LearnError::TooFewRows { n, d });
    }
    // centre for conditioning, then recover the intercept
    let means: Vec<f64> = (0..d).map(|j| x.column(j).iter().sum::<f64>() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let a = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - means[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - ym));
    let scale: Vec<f64> = (0..d).map(|j| a.column(j).norm()).collect();
    let dependent: Vec<usize> = (0..d).filter(|&j| scale[j] == 0.0).collect();
    if !dependent.is_empty() {
        return Err(LearnError::RankDeficient(dependent.iter().map(|j| j.to_string()).collect()));
    }
    let a = DMatrix::from_fn(n, d, |i, j| a[(i, j)] / scale[j]);
    let qr = a.qr();
    let r = qr.r();
    let rmax = (0..d).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let dependent: Vec<usize> = (0..d).filter(|&j| r[(j, j)].abs() <= RANK_TOL * rmax).collect();
    if !dependent.is_empty() {
        return Err(LearnError::RankDeficient(dependent.iter().map(|j| j.to_string()).collect()));
    }
    let qtb = qr.q().transpose() * b;
    let beta = r.solve_upper_triangular(&qtb).ok_or_else(|| LearnError::RankDeficient(vec![]))?;
    let coef: Vec<f64> = (0..d).map(|j| beta[j] / scale[j]).collect();
    let intercept = ym - coef.iter().zip(&means).map(|(c, m)| c * m).sum::<f64>();
    Ok(Coefficients { coef, intercept })
}

pub(super) fn linear_predict(c: &Coefficients, x: &Matrix) -> Result<Vec<f64>> {
    check_width(c.coef.len(), x)?;
    Ok(x.rows_iter().map(|r| c.intercept + r.iter().zip(&c.coef).map(|(a, b)| a * b).sum::<f64>()).collect())
}

impl Learner for LinearRegression {
    fn family(&self) -> ModelFamily {
        ModelFamily::LinearRegression
    }

    fn params(&self) -> Params {
        Params::new()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_classification: false, supports_regression: true, exposes_coefficients: true }
    }

    fn fit(&mut self, x: &Matrix, y: &[f64], _task: Task, _rng: &mut Rng) -> Result<FitReport> {
        self.fitted = Some(ols(x, y)?);
        Ok(FitReport::ok(1))
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        linear_predict(self.fitted.as_ref().ok_or(LearnError::NotFitted)?, x)
    }

    fn predict_proba(&self, _x: &Matrix) -> Result<Matrix> {
        Err(LearnError::UnsupportedTask { family: "linear_regression".into(), task: "classification".into() })
    }

    fn coefficients(&self) -> Option<Vec<Coefficients>> {
        self.fitted.clone().map(|c| vec![c])
    }
}

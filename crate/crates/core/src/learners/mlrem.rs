use super::linear::linear_predict;
use super::params::{get_f64, get_usize, ModelFamily, ParamValue};
use super::{Capabilities, Coefficients, FitReport, LearnError, Learner, Params, Result, Task};
use crate::matrix::{mean_sd, Matrix};
use crate::rng::Rng;
use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const MIN_ABS_BETA: f64 = 1e-8;

/// Sparse linear regression: iteratively reweighted ridge converging to the
/// posterior mode under a Laplace prior, with pruning and clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlrem {
    pub alpha: f64,
    pub max_beta: f64,
    pub weight_threshold: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub fitted: Option<Coefficients>,
}

impl Default for Mlrem {
    fn default() -> Self {
        Self { alpha: 0.1, max_beta: 40.0, weight_threshold: 1e-3, max_iterations: 300, tolerance: 0.01, fitted: None }
    }
}

impl Mlrem {
    pub fn from_params(p: &Params) -> Result<Self> {
        let d = Self::default();
        let m = Self {
            alpha: get_f64(p, "alpha", d.alpha)?,
            max_beta: get_f64(p, "max_beta", d.max_beta)?,
            weight_threshold: get_f64(p, "weight_threshold", d.weight_threshold)?,
            max_iterations: get_usize(p, "max_iterations", d.max_iterations)?,
            tolerance: get_f64(p, "tolerance", d.tolerance)?,
            fitted: None,
        };
        for (name, v) in [("alpha", m.alpha), ("weight_threshold", m.weight_threshold), ("tolerance", m.tolerance)] {
            if v < 0.0 {
                return Err(LearnError::InvalidParam { name: name.into(), reason: "must be ≥ 0".into() });
            }
        }
        if m.max_beta <= 0.0 {
            return Err(LearnError::InvalidParam { name: "max_beta".into(), reason: "must be > 0".into() });
        }
        Ok(m)
    }
}

/// Solve (XᵀX + diag(pen)) β = Xᵀy restricted to `active`.
fn weighted_ridge(xtx: &DMatrix<f64>, xty: &DVector<f64>, pen: &[f64], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut beta = vec![0.0; xty.len()];
    if k == 0 {
        return Some(beta);
    }
    let a = DMatrix::from_fn(k, k, |i, j| xtx[(active[i], active[j])] + if i == j { pen[active[i]] } else { 0.0 });
    let b = DVector::from_fn(k, |i, _| xty[active[i]]);
    let sol = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a.lu().solve(&b)?,
    };
    for (i, &j) in active.iter().enumerate() {
        beta[j] = sol[i];
    }
    Some(beta)
}

fn objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], alpha: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    let r = y - x * b;
    r.norm_squared() + alpha * beta.iter().map(|v| v.abs()).sum::<f64>()
}

impl Learner for Mlrem {
    fn family(&self) -> ModelFamily {
        ModelFamily::Mlrem
    }

    fn params(&self) -> Params {
        Params::from([
            ("alpha".to_string(), ParamValue::Float(self.alpha)),
            ("max_beta".to_string(), ParamValue::Float(self.max_beta)),
            ("weight_threshold".to_string(), ParamValue::Float(self.weight_threshold)),
            ("max_iterations".to_string(), ParamValue::Int(self.max_iterations as i64)),
            ("tolerance".to_string(), ParamValue::Float(self.tolerance)),
        ])
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_classification: false, supports_regression: true, exposes_coefficients: true }
    }

    fn fit(&mut self, x: &Matrix, y: &[f64], _task: Task, _rng: &mut Rng) -> Result<FitReport> {
        let (n, d) = (x.nrows(), x.ncols());
        let stats: Vec<(f64, f64)> = (0..d).map(|j| mean_sd(&x.column(j))).collect();
        let (ym, _) = mean_sd(y);
        // constant columns carry no signal and are left at zero
        let usable: Vec<usize> = (0..d).filter(|&j| stats[j].1 > 0.0).collect();
        let xs = DMatrix::from_fn(n, d, |i, j| if stats[j].1 > 0.0 { (x.get(i, j) - stats[j].0) / stats[j].1 } else { 0.0 });
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
        let xtx = xs.transpose() * &xs;
        let xty = xs.transpose() * &yc;

        let rank_err = || LearnError::RankDeficient(usable.iter().map(|j| j.to_string()).collect());
        let mut beta = weighted_ridge(&xtx, &xty, &vec![self.alpha; d], &usable).ok_or_else(rank_err)?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(rank_err());
        }
        let mut active = usable.clone();
        let clamp = |beta: &mut Vec<f64>, active: &mut Vec<usize>, thr: f64, max_beta: f64| {
            active.retain(|&j| beta[j].abs() >= thr);
            for (j, b) in beta.iter_mut().enumerate() {
                if !active.contains(&j) {
                    *b = 0.0;
                }
                *b = b.clamp(-max_beta, max_beta);
            }
        };
        clamp(&mut beta, &mut active, self.weight_threshold, self.max_beta);

        let mut best = (objective(&xs, &yc, &beta, self.alpha), beta.clone());
        let mut report = FitReport { converged: false, iterations: 0, warnings: Vec::new() };
        for it in 1..=self.max_iterations {
            let pen: Vec<f64> = beta.iter().map(|b| self.alpha / b.abs().max(MIN_ABS_BETA)).collect();
            let mut next = weighted_ridge(&xtx, &xty, &pen, &active).ok_or_else(rank_err)?;
            clamp(&mut next, &mut active, self.weight_threshold, self.max_beta);
            let delta = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            beta = next;
            report.iterations = it;
            let obj = objective(&xs, &yc, &beta, self.alpha);
            if obj <= best.0 {
                best = (obj, beta.clone());
            }
            if delta < self.tolerance {
                report.converged = true;
                break;
            }
        }
        if !report.converged {
            let msg = format!("did not converge after {} iterations; best iterate kept", self.max_iterations);
            warn!("mlrem: {msg}");
            report.warnings.push(msg);
            beta = best.1;
        }
        let coef: Vec<f64> = (0..d).map(|j| if stats[j].1 > 0.0 { beta[j] / stats[j].1 } else { 0.0 }).collect();
        let intercept = ym - coef.iter().zip(&stats).map(|(c, s)| c * s.0).sum::<f64>();
        self.fitted = Some(Coefficients { coef, intercept });
        Ok(report)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        linear_predict(self.fitted.as_ref().ok_or(LearnError::NotFitted)?, x)
    }

    fn predict_proba(&self, _x: &Matrix) -> Result<Matrix> {
        Err(LearnError::UnsupportedTask { family: "mlrem".into(), task: "classification".into() })
    }

    fn coefficients(&self) -> Option<Vec<Coefficients>> {
        self.fitted.clone().map(|c| vec![c])
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::super::linear::ols;
    use super::*;
    use crate::preprocess::lasso_coordinate_descent;
    use crate::preprocess::LassoOptions;

    /// y = 2·x1 + ε, five pure-noise features.
    pub(crate) fn recovery_data(seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = Rng::stream(seed, "mlrem-recovery");
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..6).map(|_| r.normal()).collect()).collect();
        let y = rows.iter().map(|row| 2.0 * row[0] + 0.01 * r.normal()).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn recovers_sparse_signal() {
        let (x, y) = recovery_data(1221);
        let mut m = Mlrem { alpha: 0.8, ..Mlrem::default() };
        let rep = m.fit(&x, &y, Task::Regression, &mut Rng::stream(0, "")).unwrap();
        assert!(rep.converged);
        let c = m.fitted.unwrap();
        assert!((c.coef[0] - 2.0).abs() < 0.1, "{:?}", c.coef);
        assert!(c.coef[1..].iter().all(|&b| b == 0.0), "{:?}", c.coef);
    }

    #[test]
    fn lasso_oracle_agrees_noise_is_inactive() {
        // The reweighting has the L1 problem ‖y − Xβ‖² + α‖β‖₁ on standardised
        // columns as its fixed point, i.e. λ = α / (2n) in the ½n-scaled form.
        let (x, y) = recovery_data(1221);
        let n = x.nrows();
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|j| {
                let (m, s) = mean_sd(&x.column(j));
                x.column(j).iter().map(|v| (v - m) / s).collect()
            })
            .collect();
        let (ym, _) = mean_sd(&y);
        let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
        let fit = lasso_coordinate_descent(&Matrix::from_columns(&cols), &yc, 0.8 / (2.0 * n as f64), LassoOptions::default()).unwrap();
        assert!(fit.coef[0] != 0.0);
        assert!(fit.coef[1..].iter().all(|&b| b == 0.0), "{:?}", fit.coef);
    }

    #[test]
    fn zero_penalty_is_ols() {
        let mut r = Rng::stream(7, "mlrem-ols");
        let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..4).map(|_| r.normal()).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|row| row[0] - 0.5 * row[2] + r.normal()).collect();
        let x = Matrix::from_rows(&rows);
        let mut m = Mlrem { alpha: 0.0, weight_threshold: 0.0, ..Mlrem::default() };
        m.fit(&x, &y, Task::Regression, &mut r).unwrap();
        let o = ols(&x, &y).unwrap();
        let c = m.fitted.unwrap();
        for (a, b) in c.coef.iter().zip(&o.coef) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((c.intercept - o.intercept).abs() < 1e-4);
    }

    #[test]
    fn max_beta_clamps_in_standardised_units() {
        let (x, y) = recovery_data(3);
        let mut m = Mlrem { max_beta: 1.0, ..Mlrem::default() };
        m.fit(&x, &y, Task::Regression, &mut Rng::stream(0, "")).unwrap();
        let sd = mean_sd(&x.column(0)).1;
        assert!((m.fitted.unwrap().coef[0] * sd - 1.0).abs() < 1e-12);
    }
}

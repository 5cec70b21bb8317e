use super::params::{get_f64, get_usize, ModelFamily, ParamValue};
use super::{
    check_width, classes_from_proba, normalise_rows, sigmoid, Capabilities, Coefficients, FitReport, LearnError,
    Learner, Params, Result, Task,
};
use crate::matrix::Matrix;
use crate::rng::Rng;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const GRAD_TOL: f64 = 1e-8;

/// L2-regularised logistic regression by Newton's method; one-vs-rest for
/// more than two classes. The intercept is not penalised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub l2: f64,
    pub max_iterations: usize,
    pub n_classes: usize,
    /// One entry for binary problems (class 1 vs 0), else one per class.
    pub fitted: Option<Vec<Coefficients>>,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        Self { l2: 1.0, max_iterations: 100, n_classes: 0, fitted: None }
    }
}

fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Σ log-loss + (l2/2)‖w‖² for a 0/1 target.
pub(crate) fn penalised_loss(x: &Matrix, t: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let mut s = 0.0;
    for (row, &ti) in x.rows_iter().zip(t) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        s += log1pexp(z) - ti * z;
    }
    s + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient, intercept last.
pub(crate) fn penalised_gradient(x: &Matrix, t: &[f64], w: &[f64], b: f64, l2: f64) -> Vec<f64> {
    let d = w.len();
    let mut g = vec![0.0; d + 1];
    for (row, &ti) in x.rows_iter().zip(t) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let r = sigmoid(z) - ti;
        for j in 0..d {
            g[j] += r * row[j];
        }
        g[d] += r;
    }
    for j in 0..d {
        g[j] += l2 * w[j];
    }
    g
}

fn fit_binary(x: &Matrix, t: &[f64], l2: f64, max_iter: usize) -> Result<(Coefficients, FitReport)> {
    let (n, d) = (x.nrows(), x.ncols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = penalised_loss(x, t, &w, b, l2);
    let mut report = FitReport::default();
    for it in 0..max_iter {
        let g = penalised_gradient(x, t, &w, b, l2);
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        report.iterations = it;
        if gnorm < GRAD_TOL {
            report.converged = true;
            break;
        }
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for row in x.rows_iter() {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let p = sigmoid(z);
            let s = p * (1.0 - p);
            for i in 0..=d {
                let xi = if i < d { row[i] } else { 1.0 };
                for j in 0..=i {
                    let xj = if j < d { row[j] } else { 1.0 };
                    h[(i, j)] += s * xi * xj;
                }
            }
        }
        for i in 0..=d {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
            if i < d {
                h[(i, i)] += l2;
            }
        }
        let gv = DVector::from_column_slice(&g);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&gv),
            None => {
                // singular curvature: fall back to a lightly damped system
                let damp = 1e-8 * (1.0 + h.diagonal().amax());
                let hd = h + DMatrix::identity(d + 1, d + 1) * damp;
                hd.lu().solve(&gv).unwrap_or(gv.clone())
            }
        };
        let mut scale = 1.0;
        let slope: f64 = -g.iter().zip(step.iter()).map(|(a, s)| a * s).sum::<f64>();
        // near the optimum the decrease is below round-off: take the full step
        let tiny = -slope < 1e-10 * loss.abs().max(1.0);
        let accepted = loop {
            let nw: Vec<f64> = (0..d).map(|j| w[j] - scale * step[j]).collect();
            let nb = b - scale * step[d];
            let nl = penalised_loss(x, t, &nw, nb, l2);
            if tiny || nl <= loss + 1e-4 * scale * slope || scale < 1e-10 {
                break Some((nw, nb, nl));
            }
            scale *= 0.5;
        };
        let (nw, nb, nl) = accepted.expect("line search always returns");
        w = nw;
        b = nb;
        loss = nl;
        let wmax = w.iter().fold(b.abs(), |m, v| m.max(v.abs()));
        if l2 == 0.0 && wmax > 1e6 {
            return Err(LearnError::PerfectSeparation);
        }
    }
    // unpenalised fits on separable data "converge" by saturating every
    // probability while the weights run off
    if l2 == 0.0 && n > 0 {
        let saturated = x.rows_iter().zip(t).all(|(row, &ti)| {
            let z = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            (sigmoid(z) - ti).abs() < 1e-6
        });
        if saturated {
            return Err(LearnError::PerfectSeparation);
        }
    }
    if !report.converged {
        let g = penalised_gradient(x, t, &w, b, l2);
        report.converged = g.iter().all(|v| v.abs() < GRAD_TOL);
        report.iterations = max_iter;
        if !report.converged {
            if l2 == 0.0 {
                return Err(LearnError::PerfectSeparation);
            }
            report.warnings.push(format!("logistic regression did not converge in {max_iter} iterations"));
        }
    }
    Ok((Coefficients { coef: w, intercept: b }, report))
}

impl LogisticRegression {
    pub fn from_params(p: &Params) -> Result<Self> {
        let d = Self::default();
        let l2 = get_f64(p, "l2", d.l2)?;
        if l2 < 0.0 {
            return Err(LearnError::InvalidParam { name: "l2".into(), reason: "must be ≥ 0".into() });
        }
        Ok(Self { l2, max_iterations: get_usize(p, "max_iterations", d.max_iterations)?, ..d })
    }

    fn decision(c: &Coefficients, row: &[f64]) -> f64 {
        c.intercept + row.iter().zip(&c.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Learner for LogisticRegression {
    fn family(&self) -> ModelFamily {
        ModelFamily::LogisticRegression
    }

    fn params(&self) -> Params {
        Params::from([
            ("l2".to_string(), ParamValue::Float(self.l2)),
            ("max_iterations".to_string(), ParamValue::Int(self.max_iterations as i64)),
        ])
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_classification: true, supports_regression: false, exposes_coefficients: true }
    }

    fn fit(&mut self, x: &Matrix, y: &[f64], task: Task, _rng: &mut Rng) -> Result<FitReport> {
        let k = task.n_classes().max(2);
        let targets: Vec<Vec<f64>> = if k == 2 {
            vec![y.iter().map(|&c| if c == 1.0 { 1.0 } else { 0.0 }).collect()]
        } else {
            (0..k).map(|c| y.iter().map(|&v| if v == c as f64 { 1.0 } else { 0.0 }).collect()).collect()
        };
        let mut report = FitReport::ok(0);
        let mut fitted = Vec::new();
        for t in &targets {
            let (c, r) = fit_binary(x, t, self.l2, self.max_iterations)?;
            report.merge(r);
            fitted.push(c);
        }
        self.n_classes = k;
        self.fitted = Some(fitted);
        Ok(report)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(classes_from_proba(&self.predict_proba(x)?))
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let f = self.fitted.as_ref().ok_or(LearnError::NotFitted)?;
        check_width(f[0].coef.len(), x)?;
        if f.len() == 1 {
            let rows: Vec<Vec<f64>> = x
                .rows_iter()
                .map(|r| {
                    let p = sigmoid(Self::decision(&f[0], r));
                    vec![1.0 - p, p]
                })
                .collect();
            return Ok(Matrix::from_rows(&rows));
        }
        Ok(normalise_rows(x.rows_iter().map(|r| f.iter().map(|c| sigmoid(Self::decision(c, r))).collect()).collect()))
    }

    fn coefficients(&self) -> Option<Vec<Coefficients>> {
        self.fitted.clone()
    }
}

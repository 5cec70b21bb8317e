use super::params::{get_f64, get_usize, ModelFamily, ParamValue};
use super::{check_width, normalise_rows, sigmoid, Capabilities, FitReport, LearnError, Learner, Params, Result, Task};
use crate::matrix::Matrix;
use crate::rng::Rng;
use log::warn;
use serde::{Deserialize, Serialize};

const TAU: f64 = 1e-12;
const EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Named(String),
}

/// One dual problem's solution: f(x) = Σ coef_i K(sv_i, x) − rho.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualModel {
    pub support: Matrix,
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Every dual variable of the solved problem, before dropping zeros.
    pub alpha: Vec<f64>,
    /// Signs paired with `alpha` (±1).
    pub y: Vec<f64>,
}

impl DualModel {
    fn decision(&self, kernel: &Kernel, row: &[f64]) -> f64 {
        self.support.rows_iter().zip(&self.coef).map(|(sv, c)| c * kernel.eval(sv, row)).sum::<f64>() - self.rho
    }
}

/// Support vector machine: C-SVC (one-vs-rest for several classes) or ε-SVR,
/// both solved with second-order working-set SMO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub c: f64,
    pub kernel_name: String,
    pub gamma: Gamma,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub kernel: Option<Kernel>,
    pub task: Option<Task>,
    pub n_features: usize,
    pub duals: Vec<DualModel>,
}

impl Default for Svm {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel_name: "rbf".into(),
            gamma: Gamma::Named("scale".into()),
            epsilon: 0.1,
            max_iterations: 10_000_000,
            kernel: None,
            task: None,
            n_features: 0,
            duals: Vec::new(),
        }
    }
}

/// Solve min ½αᵀQα + pᵀα s.t. yᵀα = const, 0 ≤ α ≤ C with Q_ij = y_i y_j K_ij.
/// Returns (alpha, rho, converged, iterations).
fn smo(k: &dyn Fn(usize, usize) -> f64, y: &[f64], p: &[f64], c: f64, max_iter: usize) -> (Vec<f64>, f64, bool, usize) {
    let l = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k(i, j);
    let qd: Vec<f64> = (0..l).map(|i| q(i, i)).collect();
    let mut alpha = vec![0.0; l];
    let mut g = p.to_vec();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iter = 0;
    let mut converged = false;
    let mut qi = vec![0.0; l];
    let mut qj = vec![0.0; l];
    while iter < max_iter {
        // working set selection, second order
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..l {
            if y[t] > 0.0 {
                if !upper(alpha[t]) && -g[t] >= gmax {
                    gmax = -g[t];
                    i_sel = t;
                }
            } else if !lower(alpha[t]) && g[t] >= gmax {
                gmax = g[t];
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            converged = true;
            break;
        }
        let i = i_sel;
        for t in 0..l {
            qi[t] = q(i, t);
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..l {
            if y[t] > 0.0 {
                if !lower(alpha[t]) {
                    let diff = gmax + g[t];
                    gmax2 = gmax2.max(g[t]);
                    if diff > 0.0 {
                        let quad = qd[i] + qd[t] - 2.0 * y[i] * qi[t];
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            j_sel = t;
                            obj_min = obj;
                        }
                    }
                }
            } else if !upper(alpha[t]) {
                let diff = gmax - g[t];
                gmax2 = gmax2.max(-g[t]);
                if diff > 0.0 {
                    let quad = qd[i] + qd[t] + 2.0 * y[i] * qi[t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        j_sel = t;
                        obj_min = obj;
                    }
                }
            }
        }
        if gmax + gmax2 < EPS || j_sel == usize::MAX {
            converged = true;
            break;
        }
        let j = j_sel;
        iter += 1;
        for t in 0..l {
            qj[t] = q(j, t);
        }
        let (oi, oj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = { let v = qd[i] + qd[j] + 2.0 * qi[j]; if v <= 0.0 { TAU } else { v } };
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = { let v = qd[i] + qd[j] - 2.0 * qi[j]; if v <= 0.0 { TAU } else { v } };
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - oi, alpha[j] - oj);
        for t in 0..l {
            g[t] += qi[t] * di + qj[t] * dj;
        }
    }
    // rho from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut nfree, mut sfree) = (0usize, 0.0);
    for t in 0..l {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            nfree += 1;
            sfree += yg;
        }
    }
    let rho = if nfree > 0 { sfree / nfree as f64 } else { (ub + lb) / 2.0 };
    (alpha, rho, converged, iter)
}

impl Svm {
    pub fn from_params(p: &Params) -> Result<Self> {
        let d = Self::default();
        let c = get_f64(p, "C", d.c)?;
        if c <= 0.0 {
            return Err(LearnError::InvalidParam { name: "C".into(), reason: "must be > 0".into() });
        }
        let kernel_name = match p.get("kernel") {
            None | Some(ParamValue::Null) => d.kernel_name.clone(),
            Some(ParamValue::Str(s)) if s == "linear" || s == "rbf" => s.clone(),
            Some(v) => return Err(LearnError::InvalidParam { name: "kernel".into(), reason: format!("unknown kernel {v}") }),
        };
        let gamma = match p.get("gamma") {
            None | Some(ParamValue::Null) => d.gamma.clone(),
            Some(ParamValue::Str(s)) if s == "scale" || s == "auto" => Gamma::Named(s.clone()),
            Some(v) => match v.as_f64() {
                Some(g) if g > 0.0 => Gamma::Value(g),
                _ => return Err(LearnError::InvalidParam { name: "gamma".into(), reason: "expected > 0, `scale` or `auto`".into() }),
            },
        };
        let epsilon = get_f64(p, "epsilon", d.epsilon)?;
        if epsilon < 0.0 {
            return Err(LearnError::InvalidParam { name: "epsilon".into(), reason: "must be ≥ 0".into() });
        }
        Ok(Self { c, kernel_name, gamma, epsilon, max_iterations: get_usize(p, "max_iterations", d.max_iterations)?, ..d })
    }

    fn resolve_kernel(&self, x: &Matrix) -> Kernel {
        if self.kernel_name == "linear" {
            return Kernel::Linear;
        }
        let d = x.ncols().max(1) as f64;
        let gamma = match &self.gamma {
            Gamma::Value(g) => *g,
            Gamma::Named(s) if s == "auto" => 1.0 / d,
            Gamma::Named(_) => {
                let v = x.as_slice();
                let m = v.iter().sum::<f64>() / v.len() as f64;
                let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64;
                if var > 0.0 { 1.0 / (d * var) } else { 1.0 }
            }
        };
        Kernel::Rbf { gamma }
    }

    fn decisions(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        let kernel = self.kernel.ok_or(LearnError::NotFitted)?;
        check_width(self.n_features, x)?;
        Ok(x.rows_iter().map(|r| self.duals.iter().map(|m| m.decision(&kernel, r)).collect()).collect())
    }

    pub fn decision_function(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.decisions(x)
    }
}

fn gram(x: &Matrix, kernel: &Kernel) -> Vec<f64> {
    let n = x.nrows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

impl Learner for Svm {
    fn family(&self) -> ModelFamily {
        ModelFamily::Svm
    }

    fn params(&self) -> Params {
        Params::from([
            ("C".to_string(), ParamValue::Float(self.c)),
            ("kernel".to_string(), ParamValue::Str(self.kernel_name.clone())),
            (
                "gamma".to_string(),
                match &self.gamma {
                    Gamma::Value(g) => ParamValue::Float(*g),
                    Gamma::Named(s) => ParamValue::Str(s.clone()),
                },
            ),
            ("epsilon".to_string(), ParamValue::Float(self.epsilon)),
            ("max_iterations".to_string(), ParamValue::Int(self.max_iterations as i64)),
        ])
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_classification: true, supports_regression: true, exposes_coefficients: false }
    }

    fn fit(&mut self, x: &Matrix, y: &[f64], task: Task, _rng: &mut Rng) -> Result<FitReport> {
        let n = x.nrows();
        let mut report = FitReport::ok(0);
        for j in 0..x.ncols() {
            let col = x.column(j);
            let range = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - col.iter().cloned().fold(f64::INFINITY, f64::min);
            if range > 10.0 {
                let msg = format!("feature {j} spans {range:.3}; SVMs expect scaled features");
                warn!("svm: {msg}");
                report.warnings.push(msg);
                break;
            }
        }
        let kernel = self.resolve_kernel(x);
        let kmat = gram(x, &kernel);
        let max_iter = self.max_iterations.max(100 * n);
        let mut duals = Vec::new();
        let mut solve = |signs: Vec<f64>, p: Vec<f64>, kf: &dyn Fn(usize, usize) -> f64, idx: &dyn Fn(usize) -> usize| {
            let (alpha, rho, conv, it) = smo(kf, &signs, &p, self.c, max_iter);
            report.converged &= conv;
            report.iterations = report.iterations.max(it);
            let mut coef_by_row = vec![0.0; n];
            for t in 0..alpha.len() {
                coef_by_row[idx(t)] += signs[t] * alpha[t];
            }
            let sv: Vec<usize> = (0..n).filter(|&i| coef_by_row[i] != 0.0).collect();
            duals.push(DualModel {
                support: x.select_rows(&sv),
                coef: sv.iter().map(|&i| coef_by_row[i]).collect(),
                rho,
                alpha,
                y: signs,
            });
        };
        match task {
            Task::Regression => {
                let signs: Vec<f64> = (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
                let p: Vec<f64> = (0..2 * n).map(|t| if t < n { self.epsilon - y[t] } else { self.epsilon + y[t - n] }).collect();
                solve(signs, p, &|i, j| kmat[(i % n) * n + j % n], &|t| t % n);
            }
            Task::Classification { n_classes } => {
                let positives: Vec<usize> = if n_classes <= 2 { vec![1] } else { (0..n_classes).collect() };
                for c in positives {
                    let signs: Vec<f64> = y.iter().map(|&v| if v == c as f64 { 1.0 } else { -1.0 }).collect();
                    solve(signs, vec![-1.0; n], &|i, j| kmat[i * n + j], &|t| t);
                }
            }
        }
        if !report.converged {
            let msg = format!("SMO stopped after {max_iter} iterations before reaching tolerance");
            warn!("svm: {msg}");
            report.warnings.push(msg);
        }
        self.kernel = Some(kernel);
        self.task = Some(task);
        self.n_features = x.ncols();
        self.duals = duals;
        Ok(report)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self.task {
            Some(Task::Regression) => Ok(self.decisions(x)?.into_iter().map(|v| v[0]).collect()),
            Some(Task::Classification { n_classes }) if n_classes <= 2 => {
                Ok(self.decisions(x)?.into_iter().map(|v| if v[0] > 0.0 { 1.0 } else { 0.0 }).collect())
            }
            Some(_) => Ok(self
                .decisions(x)?
                .into_iter()
                .map(|v| super::argmax(&v) as f64)
                .collect()),
            None => Err(LearnError::NotFitted),
        }
    }

    /// Logistic squashing of decision values; not calibrated.
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        match self.task {
            Some(Task::Classification { n_classes }) if n_classes <= 2 => {
                let rows: Vec<Vec<f64>> = self.decisions(x)?.into_iter().map(|v| {
                    let p = sigmoid(v[0]);
                    vec![1.0 - p, p]
                }).collect();
                Ok(Matrix::from_rows(&rows))
            }
            Some(Task::Classification { .. }) => {
                Ok(normalise_rows(self.decisions(x)?.into_iter().map(|v| v.into_iter().map(sigmoid).collect()).collect()))
            }
            Some(Task::Regression) => Err(LearnError::UnsupportedTask { family: "svm".into(), task: "probabilities".into() }),
            None => Err(LearnError::NotFitted),
        }
    }
}

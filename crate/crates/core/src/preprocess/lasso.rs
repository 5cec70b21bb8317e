//! L1-penalised regression by cyclic coordinate descent.
//!
//! Regression solves `min ½n⁻¹‖y − Xβ‖² + λ‖β‖₁`; classification solves the
//! L1-penalised mean logistic loss with an unpenalised intercept by
//! iteratively reweighted least squares around the same inner solver.

use super::{PreprocessError, Result};
use crate::matrix::{mean, mean_sd, Matrix};
use crate::tabular::ProblemType;

pub const ACTIVE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    pub last_delta: f64,
}

#[inline]
fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// `max_j |n⁻¹ x_jᵀ y|`: the smallest λ whose solution is all zeros.
pub fn lasso_lambda_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| (x.column(j).iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n).abs())
        .fold(0.0, f64::max)
}

/// Weighted coordinate descent on `½n⁻¹ Σ wᵢ(yᵢ − b₀ − xᵢβ)² + λ‖β‖₁`.
/// `weights = None` means unit weights and no intercept.
fn weighted_cd(
    cols: &[Vec<f64>],
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
    beta: &mut [f64],
    intercept: &mut f64,
    opts: LassoOptions,
) -> Result<(usize, f64)> {
    let n = y.len();
    let nf = n as f64;
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let fit_intercept = weights.is_some();
    let mut resid: Vec<f64> = (0..n)
        .map(|i| y[i] - *intercept - cols.iter().zip(beta.iter()).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    let curv: Vec<f64> = cols.iter().map(|c| (0..n).map(|i| w(i) * c[i] * c[i]).sum::<f64>() / nf).collect();
    let wsum: f64 = (0..n).map(w).sum::<f64>() / nf;
    let mut last_delta = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let mut delta: f64 = 0.0;
        if fit_intercept && wsum > 0.0 {
            let step = (0..n).map(|i| w(i) * resid[i]).sum::<f64>() / nf / wsum;
            *intercept += step;
            for r in resid.iter_mut() {
                *r -= step;
            }
            delta = delta.max(step.abs());
        }
        for (j, c) in cols.iter().enumerate() {
            if curv[j] <= 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let old = beta[j];
            let rho = (0..n).map(|i| w(i) * c[i] * resid[i]).sum::<f64>() / nf + curv[j] * old;
            let new = soft_threshold(rho, lambda) / curv[j];
            if new != old {
                let d = new - old;
                for i in 0..n {
                    resid[i] -= c[i] * d;
                }
                beta[j] = new;
                delta = delta.max(d.abs());
            }
        }
        last_delta = delta;
        if delta < opts.tol {
            return Ok((sweep, delta));
        }
    }
    Err(PreprocessError::DidNotConverge { sweeps: opts.max_sweeps, last_delta })
}

/// Plain coordinate descent on the given design (no centring, no scaling,
/// no intercept).
pub fn lasso_coordinate_descent(x: &Matrix, y: &[f64], lambda: f64, opts: LassoOptions) -> Result<LassoFit> {
    let cols = x.columns();
    let mut beta = vec![0.0; x.ncols()];
    let mut b0 = 0.0;
    let (sweeps, last_delta) = weighted_cd(&cols, y, None, lambda, &mut beta, &mut b0, opts)?;
    Ok(LassoFit { coef: beta, sweeps, last_delta })
}

/// L1 logistic regression for a 0/1 target on an already scaled design.
fn l1_logistic(cols: &[Vec<f64>], y: &[f64], lambda: f64, opts: LassoOptions) -> Result<Vec<f64>> {
    let n = y.len();
    let p = cols.len();
    let mut beta = vec![0.0; p];
    let ybar = mean(y).clamp(1e-6, 1.0 - 1e-6);
    let mut b0 = (ybar / (1.0 - ybar)).ln();
    let inner = LassoOptions { tol: opts.tol, max_sweeps: opts.max_sweeps };
    for outer in 0..100 {
        let eta: Vec<f64> = (0..n).map(|i| b0 + cols.iter().zip(&beta).map(|(c, b)| c[i] * b).sum::<f64>()).collect();
        let prob: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
        let w: Vec<f64> = prob.iter().map(|q| (q * (1.0 - q)).max(1e-5)).collect();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - prob[i]) / w[i]).collect();
        let before = beta.clone();
        let b0_before = b0;
        weighted_cd(cols, &z, Some(&w), lambda, &mut beta, &mut b0, inner)?;
        let change = before
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold((b0 - b0_before).abs(), f64::max);
        if change < opts.tol {
            return Ok(beta);
        }
        if outer == 99 {
            return Err(PreprocessError::DidNotConverge { sweeps: 100, last_delta: change });
        }
    }
    unreachable!()
}

/// Standardises `x` locally, fits the L1 model and returns the indices of
/// features with a non-zero coefficient. Classification targets are class
/// codes; multiclass problems keep the union over one-vs-rest fits.
pub fn select_by_lasso(x: &Matrix, y: &[f64], lambda: f64, problem: ProblemType) -> Result<Vec<usize>> {
    let n = x.nrows();
    let cols: Vec<Vec<f64>> = (0..x.ncols())
        .map(|j| {
            let c = x.column(j);
            let (m, sd) = mean_sd(&c);
            if sd > 0.0 {
                c.iter().map(|v| (v - m) / sd).collect()
            } else {
                vec![0.0; n]
            }
        })
        .collect();
    let active: Vec<bool> = match problem {
        ProblemType::Regression => {
            let ym = mean(y);
            let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
            let mut beta = vec![0.0; cols.len()];
            let mut b0 = 0.0;
            weighted_cd(&cols, &yc, None, lambda, &mut beta, &mut b0, LassoOptions::default())?;
            beta.iter().map(|b| b.abs() > ACTIVE_EPS).collect()
        }
        ProblemType::Classification => {
            let k = y.iter().fold(0.0f64, |m, &v| m.max(v)) as usize + 1;
            let classes: Vec<usize> = if k <= 2 { vec![1] } else { (0..k).collect() };
            let mut act = vec![false; cols.len()];
            for c in classes {
                let yc: Vec<f64> = y.iter().map(|&v| f64::from(v as usize == c)).collect();
                let beta = l1_logistic(&cols, &yc, lambda, LassoOptions::default())?;
                for (a, b) in act.iter_mut().zip(&beta) {
                    *a |= b.abs() > ACTIVE_EPS;
                }
            }
            act
        }
    };
    let keep: Vec<usize> = active.iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j).collect();
    if keep.is_empty() {
        return Err(PreprocessError::AllFeaturesDropped);
    }
    Ok(keep)
}

use super::{InterpretError, Predictor, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use nalgebra::{DMatrix, DVector};

const RIDGE: f64 = 1e-3;

/// Local linear surrogate around `instance`. Perturbations are Gaussian with
/// the training sd per feature; regressors are the perturbations in
/// standardised units, so a weight is the output change per training sd.
pub fn lime_explain(f: &Predictor, instance: &[f64], train_sd: &[f64], n_samples: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let d = instance.len();
    if n_samples < 50 {
        return Err(InterpretError::InvalidConfig("lime_samples must be ≥ 50".into()));
    }
    if train_sd.len() != d {
        return Err(InterpretError::InvalidConfig("train_sd width differs from instance".into()));
    }
    let sigma2 = 0.75f64.powi(2) * d as f64;
    // first sample is the instance itself
    let mut z = vec![0.0; n_samples * d];
    for k in 1..n_samples {
        for j in 0..d {
            z[k * d + j] = rng.normal();
        }
    }
    let mut points = Vec::with_capacity(n_samples * d);
    for k in 0..n_samples {
        points.extend((0..d).map(|j| instance[j] + train_sd[j] * z[k * d + j]));
    }
    let y = f(&Matrix::from_vec(n_samples, d, points))?;
    let mut w: Vec<f64> = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        // constant features contribute no distance and get no regressor
        let dist2: f64 = (0..d).filter(|&j| train_sd[j] > 0.0).map(|j| z[k * d + j].powi(2)).sum();
        w.push((-dist2 / sigma2).exp());
    }
    let wsum: f64 = w.iter().sum();
    if wsum < 1e-12 {
        return Err(InterpretError::DegenerateKernel);
    }
    let active: Vec<usize> = (0..d).filter(|&j| train_sd[j] > 0.0).collect();
    // weighted centring removes the unpenalised intercept
    let ybar = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let zbar: Vec<f64> = active.iter().map(|&j| (0..n_samples).map(|k| w[k] * z[k * d + j]).sum::<f64>() / wsum).collect();
    let p = active.len();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for k in 0..n_samples {
        let zc: Vec<f64> = active.iter().enumerate().map(|(c, &j)| z[k * d + j] - zbar[c]).collect();
        let yc = y[k] - ybar;
        for r in 0..p {
            b[r] += w[k] * zc[r] * yc;
            for c in 0..p {
                a[(r, c)] += w[k] * zc[r] * zc[c];
            }
        }
    }
    for r in 0..p {
        a[(r, r)] += RIDGE;
    }
    let mut weights = vec![0.0; d];
    if p > 0 {
        let sol = a.cholesky().ok_or(InterpretError::DegenerateKernel)?.solve(&b);
        for (c, &j) in active.iter().enumerate() {
            weights[j] = sol[c];
        }
    }
    Ok(weights)
}

use super::{InterpretError, Predictor, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const MAX_EXACT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub output: f64,
    /// True when every coalition was evaluated.
    pub exact: bool,
}

/// min(size, n) background rows sampled without replacement.
pub fn sample_background(x: &Matrix, size: usize, rng: &mut Rng) -> Matrix {
    if x.nrows() <= size {
        return x.clone();
    }
    let mut idx = rng.sample_without_replacement(x.nrows(), size);
    idx.sort_unstable();
    x.select_rows(&idx)
}

/// Coalition values v(S) for each mask, batched into one model call.
fn coalition_values(f: &Predictor, instance: &[f64], background: &Matrix, masks: &[Vec<bool>]) -> Result<Vec<f64>> {
    let nb = background.nrows();
    let d = instance.len();
    let mut data = Vec::with_capacity(masks.len() * nb * d);
    for mask in masks {
        for b in background.rows_iter() {
            data.extend((0..d).map(|j| if mask[j] { instance[j] } else { b[j] }));
        }
    }
    let out = f(&Matrix::from_vec(masks.len() * nb, d, data))?;
    Ok(out.chunks(nb).map(|c| c.iter().sum::<f64>() / nb as f64).collect())
}

fn mask_of(bits: usize, d: usize) -> Vec<bool> {
    (0..d).map(|j| bits >> j & 1 == 1).collect()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn base_and_output(f: &Predictor, instance: &[f64], background: &Matrix) -> Result<(f64, f64)> {
    let d = instance.len();
    let v = coalition_values(f, instance, background, &[vec![false; d], vec![true; d]])?;
    Ok((v[0], v[1]))
}

fn check_inputs(instance: &[f64], background: &Matrix) -> Result<()> {
    if background.nrows() == 0 {
        return Err(InterpretError::InvalidConfig("background must be non-empty".into()));
    }
    if background.ncols() != instance.len() {
        return Err(InterpretError::InvalidConfig("instance and background widths differ".into()));
    }
    Ok(())
}

/// Shapley values by full enumeration of the 2^d coalitions.
pub fn exact_shapley(f: &Predictor, instance: &[f64], background: &Matrix) -> Result<Vec<f64>> {
    let d = instance.len();
    if d > MAX_EXACT {
        return Err(InterpretError::TooManyFeatures(d));
    }
    check_inputs(instance, background)?;
    let masks: Vec<Vec<bool>> = (0..1usize << d).map(|b| mask_of(b, d)).collect();
    let v = coalition_values(f, instance, background, &masks)?;
    // weight(|S|) = |S|! (d-|S|-1)! / d!
    let weight: Vec<f64> = (0..d).map(|s| 1.0 / (d as f64 * binom(d - 1, s))).collect();
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        for s in 0..1usize << d {
            if s >> j & 1 == 0 {
                *p += weight[(s as u32).count_ones() as usize] * (v[s | 1 << j] - v[s]);
            }
        }
    }
    Ok(phi)
}

struct Design {
    masks: Vec<Vec<bool>>,
    weights: Vec<f64>,
    exact: bool,
}

fn enumerate_all(d: usize) -> Design {
    let mut masks = Vec::new();
    let mut weights = Vec::new();
    for bits in 1..(1usize << d) - 1 {
        let s = (bits as u32).count_ones() as usize;
        masks.push(mask_of(bits, d));
        weights.push((d - 1) as f64 / (binom(d, s) * (s * (d - s)) as f64));
    }
    Design { masks, weights, exact: true }
}

fn subsets_of_size(d: usize, s: usize, out: &mut Vec<Vec<usize>>) {
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        out.push(idx.clone());
        let mut i = s;
        while i > 0 && idx[i - 1] == d - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for k in i..s {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Hybrid design: coalition sizes whose expected sample count covers every
/// subset are enumerated (smallest and largest first), the rest sampled from
/// the Shapley kernel with complement pairing. Repeated draws accumulate weight.
fn sampled_design(d: usize, n_samples: usize, rng: &mut Rng) -> Design {
    let n_sizes = d / 2 + d % 2;
    let n_paired = (d - 1) / 2;
    let mut kernel: Vec<f64> = (1..=n_sizes).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
    for w in kernel.iter_mut().take(n_paired) {
        *w *= 2.0;
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let mut masks: Vec<Vec<bool>> = Vec::new();
    let mut weights = Vec::new();
    let mut left = n_samples as f64;
    let mut remaining = kernel.clone();
    let mut full = 0;
    for s in 1..=n_sizes {
        let paired = s <= n_paired;
        let n_sub = binom(d, s) * if paired { 2.0 } else { 1.0 };
        if left * remaining[s - 1] / n_sub < 1.0 - 1e-8 {
            break;
        }
        full += 1;
        left -= n_sub;
        if remaining[s - 1] < 1.0 {
            let r = 1.0 - remaining[s - 1];
            remaining.iter_mut().for_each(|w| *w /= r);
        }
        let w = kernel[s - 1] / binom(d, s) / if paired { 2.0 } else { 1.0 };
        let mut subs = Vec::new();
        subsets_of_size(d, s, &mut subs);
        for sub in subs {
            let mut m = vec![false; d];
            sub.iter().for_each(|&j| m[j] = true);
            if paired {
                masks.push(m.iter().map(|b| !b).collect());
                weights.push(w);
            }
            masks.push(m);
            weights.push(w);
        }
    }
    let n_fixed = masks.len();
    let mut samples_left = n_samples.saturating_sub(n_fixed);
    if full < n_sizes && samples_left > 0 {
        let mut probs: Vec<f64> = kernel.clone();
        for p in probs.iter_mut().take(n_paired) {
            *p /= 2.0;
        }
        let probs = &probs[full..];
        let z: f64 = probs.iter().sum();
        let cdf: Vec<f64> = probs.iter().scan(0.0, |acc, p| {
            *acc += p / z;
            Some(*acc)
        }).collect();
        let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
        let mut add = |m: Vec<bool>, masks: &mut Vec<Vec<bool>>, weights: &mut Vec<f64>, left: &mut usize| {
            if let Some(&i) = seen.get(&m) {
                weights[i] += 1.0;
            } else {
                seen.insert(m.clone(), masks.len());
                masks.push(m);
                weights.push(1.0);
                *left -= 1;
            }
        };
        for _ in 0..4 * samples_left {
            if samples_left == 0 {
                break;
            }
            let u = rng.uniform();
            let k = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            let s = k + full + 1;
            let perm = rng.permutation(d);
            let mut m = vec![false; d];
            perm[..s].iter().for_each(|&j| m[j] = true);
            let comp: Vec<bool> = m.iter().map(|b| !b).collect();
            add(m, &mut masks, &mut weights, &mut samples_left);
            if samples_left > 0 && s <= n_paired {
                add(comp, &mut masks, &mut weights, &mut samples_left);
            }
        }
        let weight_left: f64 = kernel[full..].iter().sum();
        let sampled: f64 = weights[n_fixed..].iter().sum();
        weights[n_fixed..].iter_mut().for_each(|w| *w *= weight_left / sampled);
    }
    Design { masks, weights, exact: false }
}

/// Kernel SHAP with the efficiency constraint eliminated analytically: the
/// last feature's attribution is f(x) − base − Σ others.
pub fn kernel_shap(f: &Predictor, instance: &[f64], background: &Matrix, coalition_samples: usize, rng: &mut Rng) -> Result<ShapExplanation> {
    check_inputs(instance, background)?;
    let d = instance.len();
    let (base_value, output) = base_and_output(f, instance, background)?;
    let gap = output - base_value;
    if d == 1 {
        return Ok(ShapExplanation { phi: vec![gap], base_value, output, exact: true });
    }
    if coalition_samples < 2 * d + 2 {
        return Err(InterpretError::InvalidConfig(format!("coalition_samples must be ≥ {}", 2 * d + 2)));
    }
    let design = if d <= MAX_EXACT && coalition_samples >= (1usize << d) - 2 {
        enumerate_all(d)
    } else {
        sampled_design(d, coalition_samples, rng)
    };
    let v = coalition_values(f, instance, background, &design.masks)?;
    let phi = solve_constrained(&design.masks, &design.weights, &v, base_value, gap)?;
    Ok(ShapExplanation { phi, base_value, output, exact: design.exact })
}

fn solve_constrained(masks: &[Vec<bool>], weights: &[f64], v: &[f64], base_value: f64, gap: f64) -> Result<Vec<f64>> {
    let m = masks.len();
    let d = masks.first().map_or(0, Vec::len);
    if m == 0 || d < 2 {
        return Err(InterpretError::DegenerateSystem);
    }
    let mut a = DMatrix::zeros(m, d - 1);
    let mut b = DVector::zeros(m);
    for (i, mask) in masks.iter().enumerate() {
        let sw = weights[i].sqrt();
        let last = if mask[d - 1] { 1.0 } else { 0.0 };
        for j in 0..d - 1 {
            a[(i, j)] = sw * ((mask[j] as u8 as f64) - last);
        }
        b[i] = sw * (v[i] - base_value - last * gap);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 || svd.singular_values.min() <= 1e-12 * smax {
        return Err(InterpretError::DegenerateSystem);
    }
    let sol = svd.solve(&b, 0.0).map_err(|_| InterpretError::DegenerateSystem)?;
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    phi.push(gap - phi.iter().sum::<f64>());
    Ok(phi)
}

/// Mean |φ| over the rows of `x`, plus the per-row attributions. `f_for_row`
/// picks the explained output for each row (the predicted class probability
/// for classifiers). Row i draws from child stream `instance-{i}`.
pub fn global_shap<'a, F>(f_for_row: F, x: &Matrix, background: &Matrix, coalition_samples: usize, rng: &Rng) -> Result<(Vec<f64>, Vec<ShapExplanation>)>
where
    F: Fn(usize) -> Box<Predictor<'a>> + Sync,
{
    if x.nrows() == 0 {
        return Err(InterpretError::InvalidConfig("no rows to explain".into()));
    }
    let local: Vec<ShapExplanation> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let f = f_for_row(i);
            kernel_shap(&*f, x.row(i), background, coalition_samples, &mut rng.child(&format!("instance-{i}")))
        })
        .collect::<Result<_>>()?;
    let mut global = vec![0.0; x.ncols()];
    for e in &local {
        for (g, p) in global.iter_mut().zip(&e.phi) {
            *g += p.abs() / local.len() as f64;
        }
    }
    Ok((global, local))
}

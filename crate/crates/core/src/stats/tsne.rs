use super::plot::{PlotKind, PlotSpec, Series};
use super::{Result, StatsError};
use crate::matrix::Matrix;
use crate::rng::Rng;
use rayon::prelude::*;

const EXACT_LIMIT: usize = 5000;
const ENTROPY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOptions {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Record KL(P‖Q) every this many iterations.
    pub kl_every: usize,
}

impl Default for TsneOptions {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            kl_every: 50,
        }
    }
}

impl TsneOptions {
    /// Defaults with perplexity capped at (n − 1) / 3.
    pub fn for_n(n: usize) -> Self {
        let mut o = Self::default();
        o.perplexity = o.perplexity.min((n.saturating_sub(1)) as f64 / 3.0);
        o
    }
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: Matrix,
    /// (iteration, KL) pairs, KL against the unexaggerated P.
    pub kl_history: Vec<(usize, f64)>,
    /// Row-normalised conditional P before symmetrisation.
    pub conditional_p: Matrix,
}

impl TsneResult {
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl_history.iter().find(|(i, _)| *i == iteration).map(|(_, k)| *k)
    }
}

fn squared_distances(x: &Matrix) -> Vec<f64> {
    let n = x.nrows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional row for precision `beta`; returns (probabilities, entropy in nats).
fn conditional_row(d: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // shift by the smallest off-diagonal distance for stability
    let dmin = d.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j == i { 0.0 } else { (-(d[j] - dmin) * beta).exp() };
        sum += *o;
    }
    let mut h = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

fn calibrate(d: &[f64], n: usize, perplexity: f64) -> Matrix {
    let target = perplexity.ln();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let di = &d[i * n..(i + 1) * n];
            let mut p = vec![0.0; n];
            let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
            for _ in 0..200 {
                let h = conditional_row(di, i, beta, &mut p);
                let diff = h - target;
                if diff.abs() < ENTROPY_TOL {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
            }
            conditional_row(di, i, beta, &mut p);
            p
        })
        .collect();
    Matrix::from_rows(&rows)
}

/// Shannon entropy (bits) of each row of a conditional P.
pub fn conditional_entropies_bits(p: &Matrix) -> Vec<f64> {
    p.rows_iter()
        .map(|r| -r.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>())
        .collect()
}

fn kl_divergence(p: &[f64], y: &Matrix) -> f64 {
    let n = y.nrows();
    let num = student_t(y);
    let z: f64 = num.iter().sum();
    let mut kl = 0.0;
    for k in 0..n * n {
        if p[k] > 0.0 && k / n != k % n {
            kl += p[k] * (p[k] / (num[k] / z).max(1e-300)).ln();
        }
    }
    kl
}

fn student_t(y: &Matrix) -> Vec<f64> {
    let n = y.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y.row(i);
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let yj = y.row(j);
                        let d = (yi[0] - yj[0]).powi(2) + (yi[1] - yj[1]).powi(2);
                        1.0 / (1.0 + d)
                    }
                })
                .collect()
        })
        .collect();
    rows.concat()
}

/// Exact t-SNE to two dimensions.
pub fn tsne_embed(x: &Matrix, opts: &TsneOptions, rng: &mut Rng) -> Result<TsneResult> {
    let n = x.nrows();
    if n > EXACT_LIMIT {
        return Err(StatsError::TooManyPoints(n));
    }
    if opts.perplexity < 5.0 {
        return Err(StatsError::PerplexityTooSmall(opts.perplexity));
    }
    let max = (n as f64 - 1.0) / 3.0;
    if opts.perplexity > max {
        return Err(StatsError::PerplexityTooLarge { perplexity: opts.perplexity, max });
    }
    let d = squared_distances(x);
    if d.iter().all(|&v| v == 0.0) {
        return Err(StatsError::DegenerateDistances);
    }
    let cond = calibrate(&d, n, opts.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond.get(i, j) + cond.get(j, i)) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut y = Matrix::zeros(n, 2);
    for i in 0..n {
        for c in 0..2 {
            y.set(i, c, 1e-4 * rng.normal());
        }
    }
    let mut update = vec![0.0f64; n * 2];
    let mut gains = vec![1.0f64; n * 2];
    let mut kl_history = Vec::new();

    for it in 1..=opts.iterations {
        let exag = if it <= opts.exaggeration_iters { opts.early_exaggeration } else { 1.0 };
        let momentum = if it <= opts.exaggeration_iters { 0.5 } else { 0.8 };
        let num = student_t(&y);
        let z: f64 = num.iter().sum();
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let yi = y.row(i);
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let k = i * n + j;
                    let m = (exag * p[k] - num[k] / z) * num[k];
                    let yj = y.row(j);
                    g[0] += 4.0 * m * (yi[0] - yj[0]);
                    g[1] += 4.0 * m * (yi[1] - yj[1]);
                }
                g
            })
            .collect();
        for i in 0..n {
            for c in 0..2 {
                let k = i * 2 + c;
                let g = grad[i][c];
                gains[k] = if (g > 0.0) != (update[k] > 0.0) { gains[k] + 0.2 } else { gains[k] * 0.8 };
                gains[k] = gains[k].max(0.01);
                update[k] = momentum * update[k] - opts.learning_rate * gains[k] * g;
                y.set(i, c, y.get(i, c) + update[k]);
            }
        }
        for c in 0..2 {
            let m = (0..n).map(|i| y.get(i, c)).sum::<f64>() / n as f64;
            for i in 0..n {
                y.set(i, c, y.get(i, c) - m);
            }
        }
        if opts.kl_every > 0 && (it % opts.kl_every == 0 || it == opts.iterations) {
            kl_history.push((it, kl_divergence(&p, &y)));
        }
    }
    Ok(TsneResult { embedding: y, kl_history, conditional_p: cond })
}

/// Scatter of the embedding, coloured by `labels` when given.
pub fn tsne_plot(result: &TsneResult, labels: Option<Vec<String>>, title: &str) -> PlotSpec {
    let y = &result.embedding;
    let mut spec = PlotSpec::new(PlotKind::Scatter2d, title, "t-SNE 1", "t-SNE 2")
        .with_series(Series::vector("x", y.column(0)))
        .with_series(Series::vector("y", y.column(1)));
    if let Some(l) = labels {
        spec.series.push(Series::labels("group", l));
    }
    spec
}

use crate::matrix::Matrix;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini { n_classes: usize },
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub max_features: Option<usize>,
}

/// CART tree as parallel node arrays. Leaves have `feature = -1`; rows go
/// left when `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Class proportions (Gini) or `[mean]` (variance).
    pub value: Vec<Vec<f64>>,
}

struct Pending {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
}

impl Tree {
    fn push_leaf(&mut self, value: Vec<f64>) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut n = 0;
        while self.feature[n] >= 0 {
            n = if row[self.feature[n] as usize] <= self.threshold[n] { self.left[n] } else { self.right[n] } as usize;
        }
        n
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        &self.value[self.leaf_index(row)]
    }

    /// Grow a tree on `rows` of `x` (duplicates allowed, as in a bootstrap).
    /// For Gini, `y` holds class indices.
    pub fn fit(x: &Matrix, y: &[f64], rows: &[usize], params: &TreeParams, rng: &mut Rng) -> Tree {
        let mut tree = Tree { feature: vec![], threshold: vec![], left: vec![], right: vec![], value: vec![] };
        let root = tree.push_leaf(node_value(y, rows, params.criterion));
        let mut stack = vec![Pending { node: root, rows: rows.to_vec(), depth: 0 }];
        let d = x.ncols();
        let min_split = params.min_samples_split.max(2);
        let min_leaf = params.min_samples_leaf.max(1);
        while let Some(Pending { node, rows, depth }) = stack.pop() {
            if rows.len() < min_split || rows.len() < 2 * min_leaf || params.max_depth.is_some_and(|m| depth >= m) {
                continue;
            }
            if impurity_sum(y, &rows, params.criterion) <= 1e-12 * rows.len() as f64 {
                continue;
            }
            let features: Vec<usize> = match params.max_features {
                Some(k) if k < d => rng.sample_without_replacement(d, k.max(1)),
                _ => (0..d).collect(),
            };
            let Some((f, thr)) = best_split(x, y, &rows, &features, min_leaf, params.criterion) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, f) <= thr);
            let li = tree.push_leaf(node_value(y, &l, params.criterion));
            let ri = tree.push_leaf(node_value(y, &r, params.criterion));
            tree.feature[node] = f as i64;
            tree.threshold[node] = thr;
            tree.left[node] = li as u32;
            tree.right[node] = ri as u32;
            tree.value[node] = Vec::new();
            stack.push(Pending { node: ri, rows: r, depth: depth + 1 });
            stack.push(Pending { node: li, rows: l, depth: depth + 1 });
        }
        tree
    }
}

fn node_value(y: &[f64], rows: &[usize], c: Criterion) -> Vec<f64> {
    let n = rows.len().max(1) as f64;
    match c {
        Criterion::Gini { n_classes } => {
            let mut counts = vec![0.0; n_classes];
            for &i in rows {
                counts[y[i] as usize] += 1.0;
            }
            counts.iter().map(|c| c / n).collect()
        }
        Criterion::Variance => vec![rows.iter().map(|&i| y[i]).sum::<f64>() / n],
    }
}

/// n × impurity of the node.
fn impurity_sum(y: &[f64], rows: &[usize], c: Criterion) -> f64 {
    let n = rows.len() as f64;
    match c {
        Criterion::Gini { n_classes } => {
            let mut counts = vec![0.0; n_classes];
            for &i in rows {
                counts[y[i] as usize] += 1.0;
            }
            n - counts.iter().map(|c| c * c).sum::<f64>() / n
        }
        Criterion::Variance => {
            let m = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
            rows.iter().map(|&i| (y[i] - m).powi(2)).sum()
        }
    }
}

/// Best (feature, threshold) maximising the impurity decrease, or `None`
/// when no admissible split improves on the parent.
fn best_split(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    c: Criterion,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let parent = match c {
        Criterion::Gini { n_classes } => {
            let mut counts = vec![0.0; n_classes];
            for &i in rows {
                counts[y[i] as usize] += 1.0;
            }
            counts.iter().map(|c| c * c).sum::<f64>() / n as f64
        }
        Criterion::Variance => rows.iter().map(|&i| y[i]).sum::<f64>().powi(2) / n as f64,
    };
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        if x.get(order[0], f) == x.get(order[n - 1], f) {
            continue;
        }
        match c {
            Criterion::Gini { n_classes } => {
                let mut left = vec![0.0; n_classes];
                let mut right = vec![0.0; n_classes];
                for &i in &order {
                    right[y[i] as usize] += 1.0;
                }
                let (mut sl, mut sr) = (0.0, right.iter().map(|c| c * c).sum::<f64>());
                for k in 0..n - 1 {
                    let cl = y[order[k]] as usize;
                    sl += 2.0 * left[cl] + 1.0;
                    sr -= 2.0 * right[cl] - 1.0;
                    left[cl] += 1.0;
                    right[cl] -= 1.0;
                    consider(x, &order, f, k, min_leaf, sl / (k + 1) as f64 + sr / (n - k - 1) as f64, &mut best);
                }
            }
            Criterion::Variance => {
                let total: f64 = order.iter().map(|&i| y[i]).sum();
                let mut sl = 0.0;
                for k in 0..n - 1 {
                    sl += y[order[k]];
                    let sr = total - sl;
                    let nl = (k + 1) as f64;
                    let nr = (n - k - 1) as f64;
                    consider(x, &order, f, k, min_leaf, sl * sl / nl + sr * sr / nr, &mut best);
                }
            }
        }
    }
    let (score, f, thr) = best?;
    (score - parent > 1e-12 * parent.abs().max(1e-300)).then_some((f, thr))
}

fn consider(x: &Matrix, order: &[usize], f: usize, k: usize, min_leaf: usize, score: f64, best: &mut Option<(f64, usize, f64)>) {
    let n = order.len();
    if k + 1 < min_leaf || n - k - 1 < min_leaf {
        return;
    }
    let (a, b) = (x.get(order[k], f), x.get(order[k + 1], f));
    if a == b {
        return;
    }
    if best.is_none_or(|(s, _, _)| score > s) {
        let mut thr = a + (b - a) / 2.0;
        if thr >= b {
            thr = a;
        }
        *best = Some((score, f, thr));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: Criterion, depth: Option<usize>) -> TreeParams {
        TreeParams { criterion: c, max_depth: depth, min_samples_split: 2, min_samples_leaf: 1, max_features: None }
    }

    #[test]
    fn stump_finds_step() {
        let x = Matrix::from_rows(&[[0.1], [0.4], [0.35], [0.8], [0.9], [0.7]]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let rows: Vec<usize> = (0..6).collect();
        let t = Tree::fit(&x, &y, &rows, &params(Criterion::Gini { n_classes: 2 }, Some(1)), &mut Rng::stream(0, ""));
        assert_eq!(t.n_leaves(), 2);
        assert!((t.threshold[0] - 0.55).abs() < 1e-12);
        for i in 0..6 {
            assert_eq!(t.leaf_value(x.row(i))[1], y[i]);
        }
    }

    #[test]
    fn variance_tree_interpolates_training_data() {
        let x = Matrix::from_rows(&(0..20).map(|i| [i as f64]).collect::<Vec<_>>());
        let y: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let rows: Vec<usize> = (0..20).collect();
        let t = Tree::fit(&x, &y, &rows, &params(Criterion::Variance, None), &mut Rng::stream(0, ""));
        for i in 0..20 {
            assert_eq!(t.leaf_value(x.row(i))[0], y[i]);
        }
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x = Matrix::from_rows(&(0..30).map(|i| [i as f64]).collect::<Vec<_>>());
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let rows: Vec<usize> = (0..30).collect();
        let p = TreeParams { min_samples_leaf: 7, ..params(Criterion::Variance, None) };
        let t = Tree::fit(&x, &y, &rows, &p, &mut Rng::stream(0, ""));
        let mut counts = vec![0; t.n_nodes()];
        for i in 0..30 {
            counts[t.leaf_index(x.row(i))] += 1;
        }
        assert!(counts.iter().all(|&c| c == 0 || c >= 7));
    }
}

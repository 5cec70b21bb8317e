use crate::matrix::mean_sd;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Metric values for one evaluation set. Absent entries were undefined
/// (AUC on a single-class fold).
pub type MetricSet = BTreeMap<String, Option<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl RegressionMetrics {
    pub fn to_set(self) -> MetricSet {
        MetricSet::from([
            ("R2".to_string(), Some(self.r2)),
            ("MAE".to_string(), Some(self.mae)),
            ("RMSE".to_string(), Some(self.rmse)),
        ])
    }
}

pub fn regression_metrics(actual: &[f64], predicted: &[f64]) -> RegressionMetrics {
    let n = actual.len() as f64;
    let m = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - m).powi(2)).sum();
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    RegressionMetrics {
        r2,
        mae: actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / n,
        rmse: (ss_res / n).sqrt(),
    }
}

/// ROC points for binary labels (1 = positive) over all unique thresholds,
/// starting at (0, 0). `None` when only one class is present.
pub fn roc_curve(labels: &[bool], scores: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut fpr, mut tpr) = (vec![0.0], vec![0.0]);
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            k += 1;
        }
        fpr.push(fp / neg);
        tpr.push(tp / pos);
    }
    Some((fpr, tpr))
}

/// Trapezoidal area under the ROC curve.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Option<f64> {
    let (fpr, tpr) = roc_curve(labels, scores)?;
    Some(fpr.windows(2).zip(tpr.windows(2)).map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) / 2.0).sum())
}

/// Accuracy, precision, recall and F1 (positive class 1 for binary problems,
/// macro averages otherwise) plus ROC-AUC from `proba` (one-vs-rest macro
/// average for several classes).
pub fn classification_metrics(actual: &[usize], predicted: &[usize], proba: &[Vec<f64>], n_classes: usize) -> MetricSet {
    let n = actual.len() as f64;
    let accuracy = actual.iter().zip(predicted).filter(|(a, p)| a == p).count() as f64 / n;
    let prf = |c: usize| {
        let tp = actual.iter().zip(predicted).filter(|(&a, &p)| a == c && p == c).count() as f64;
        let fp = actual.iter().zip(predicted).filter(|(&a, &p)| a != c && p == c).count() as f64;
        let fnn = actual.iter().zip(predicted).filter(|(&a, &p)| a == c && p != c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        (precision, recall, f1)
    };
    let classes: Vec<usize> = if n_classes <= 2 { vec![1] } else { (0..n_classes).collect() };
    let k = classes.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for &c in &classes {
        let (a, b, d) = prf(c);
        p += a / k;
        r += b / k;
        f += d / k;
    }
    let auc = if n_classes <= 2 {
        let labels: Vec<bool> = actual.iter().map(|&a| a == 1).collect();
        let scores: Vec<f64> = proba.iter().map(|row| row[1]).collect();
        roc_auc(&labels, &scores)
    } else {
        let per: Vec<Option<f64>> = (0..n_classes)
            .map(|c| {
                let labels: Vec<bool> = actual.iter().map(|&a| a == c).collect();
                let scores: Vec<f64> = proba.iter().map(|row| row[c]).collect();
                roc_auc(&labels, &scores)
            })
            .collect();
        per.iter().all(Option::is_some).then(|| per.iter().flatten().sum::<f64>() / n_classes as f64)
    };
    MetricSet::from([
        ("accuracy".to_string(), Some(accuracy)),
        ("precision".to_string(), Some(p)),
        ("recall".to_string(), Some(r)),
        ("F1".to_string(), Some(f)),
        ("ROC_AUC".to_string(), auc),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// population sd across splits
    pub sd: f64,
    /// splits where the metric was defined
    pub n: usize,
}

/// Mean ± sd per metric across splits; undefined values are skipped.
pub type Metrics = BTreeMap<String, MetricSummary>;

pub fn summarise_sets(sets: &[MetricSet]) -> Metrics {
    let mut names: Vec<&String> = sets.iter().flat_map(|s| s.keys()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .filter_map(|name| {
            let vals: Vec<f64> = sets.iter().filter_map(|s| s.get(name).copied().flatten()).collect();
            if vals.is_empty() {
                return None;
            }
            let (mean, sd) = mean_sd(&vals);
            Some((name.clone(), MetricSummary { mean, sd, n: vals.len() }))
        })
        .collect()
}

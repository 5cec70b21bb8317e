use super::{InterpretError, Predictor, Result};
use crate::learners::{classification_metrics, regression_metrics};
use crate::matrix::{mean_sd, Matrix};
use crate::rng::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Higher is better for every scoring; errors are negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    NegMeanAbsoluteError,
    NegMeanSquaredError,
    NegRootMeanSquaredError,
    R2,
    Accuracy,
    F1,
}

impl Scoring {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "neg_mean_absolute_error" => Scoring::NegMeanAbsoluteError,
            "neg_mean_squared_error" => Scoring::NegMeanSquaredError,
            "neg_root_mean_squared_error" => Scoring::NegRootMeanSquaredError,
            "r2" => Scoring::R2,
            "accuracy" => Scoring::Accuracy,
            "f1" => Scoring::F1,
            other => return Err(InterpretError::UnknownScoring(other.into())),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scoring::NegMeanAbsoluteError => "neg_mean_absolute_error",
            Scoring::NegMeanSquaredError => "neg_mean_squared_error",
            Scoring::NegRootMeanSquaredError => "neg_root_mean_squared_error",
            Scoring::R2 => "r2",
            Scoring::Accuracy => "accuracy",
            Scoring::F1 => "f1",
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Scoring::Accuracy | Scoring::F1)
    }

    /// Classification scorings expect class indices in `actual` and `predicted`.
    pub fn score(&self, actual: &[f64], predicted: &[f64], n_classes: usize) -> f64 {
        match self {
            Scoring::NegMeanAbsoluteError => -regression_metrics(actual, predicted).mae,
            Scoring::NegMeanSquaredError => -regression_metrics(actual, predicted).rmse.powi(2),
            Scoring::NegRootMeanSquaredError => -regression_metrics(actual, predicted).rmse,
            Scoring::R2 => regression_metrics(actual, predicted).r2,
            Scoring::Accuracy | Scoring::F1 => {
                let a: Vec<usize> = actual.iter().map(|&v| v as usize).collect();
                let p: Vec<usize> = predicted.iter().map(|&v| v as usize).collect();
                let k = n_classes.max(2);
                let proba = vec![vec![0.0; k]; a.len()];
                let key = if *self == Scoring::Accuracy { "accuracy" } else { "F1" };
                classification_metrics(&a, &p, &proba, k)[key].unwrap_or(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub baseline: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// `predict` returns predictions on the scale of `y` (class indices for
/// classification). Each feature gets its own child stream so results do
/// not depend on scheduling.
pub fn permutation_importance(
    predict: &Predictor,
    x: &Matrix,
    y: &[f64],
    scoring: Scoring,
    n_classes: usize,
    repeats: usize,
    rng: &Rng,
) -> Result<PermutationResult> {
    if repeats == 0 {
        return Err(InterpretError::InvalidConfig("repeats must be ≥ 1".into()));
    }
    let baseline = scoring.score(y, &predict(x)?, n_classes);
    let per_feature: Vec<(f64, f64)> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let mut r = rng.child(&format!("feature-{j}"));
            let col = x.column(j);
            let mut drops = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let perm = r.permutation(x.nrows());
                let mut xp = x.clone();
                for (i, &p) in perm.iter().enumerate() {
                    xp.set(i, j, col[p]);
                }
                drops.push(baseline - scoring.score(y, &predict(&xp)?, n_classes));
            }
            Ok(mean_sd(&drops))
        })
        .collect::<Result<_>>()?;
    Ok(PermutationResult {
        baseline,
        mean: per_feature.iter().map(|m| m.0).collect(),
        sd: per_feature.iter().map(|m| m.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Learner, LinearRegression, Task};

    fn linear_fixture(seed: u64, scale: [f64; 3]) -> (Matrix, Vec<f64>) {
        let mut r = Rng::stream(seed, "perm-fixture");
        let n = 200;
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..3).map(|_| r.normal()).collect();
            y.push(5.0 * row[0] + 1.0 * row[2] + 0.1 * r.normal());
            rows.push(row.iter().zip(scale).map(|(v, s)| v * s).collect::<Vec<_>>());
        }
        (Matrix::from_rows(&rows), y)
    }

    fn fitted(x: &Matrix, y: &[f64]) -> LinearRegression {
        let mut m = LinearRegression::default();
        m.fit(x, y, Task::Regression, &mut Rng::stream(0, "fit")).unwrap();
        m
    }

    #[test]
    fn dominant_feature_and_unused_feature() {
        let (x, y) = linear_fixture(1221, [1.0, 1.0, 1.0]);
        let m = fitted(&x, &y);
        let f = |x: &Matrix| m.predict(x);
        let res = permutation_importance(&f, &x, &y, Scoring::NegMeanAbsoluteError, 0, 5, &Rng::stream(1221, "perm")).unwrap();
        assert!(res.mean[0] > 10.0 * res.mean[1], "{:?}", res.mean);
        // x2 only picks up a noise-sized coefficient, so permuting it barely moves MAE.
        let spread = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
        assert!(res.mean[1].abs() < 0.05 * spread);
        for (a, b) in res.mean.iter().zip(PINNED_MEAN) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    // Frozen after the ordering and magnitude checks above passed.
    const PINNED_MEAN: [f64; 3] = [5.914320915607453, 0.0003012030346449646, 0.9858324062413496];

    #[test]
    fn exactly_unused_feature_has_zero_importance() {
        let (x, y) = linear_fixture(7, [1.0, 1.0, 1.0]);
        let f = |x: &Matrix| Ok(x.column(0).iter().map(|v| 5.0 * v).collect());
        let res = permutation_importance(&f, &x, &y, Scoring::R2, 0, 5, &Rng::stream(7, "perm")).unwrap();
        assert_eq!(res.mean[1], 0.0);
        assert_eq!(res.sd[2], 0.0);
    }

    #[test]
    fn ranking_survives_affine_rescaling() {
        let order = |scale: [f64; 3]| {
            let (x, y) = linear_fixture(99, scale);
            let m = fitted(&x, &y);
            let f = |x: &Matrix| m.predict(x);
            let res = permutation_importance(&f, &x, &y, Scoring::NegMeanSquaredError, 0, 5, &Rng::stream(99, "perm")).unwrap();
            let mut idx: Vec<usize> = (0..3).collect();
            idx.sort_by(|&a, &b| res.mean[b].total_cmp(&res.mean[a]));
            idx
        };
        assert_eq!(order([1.0, 1.0, 1.0]), order([100.0, 0.01, 3.0]));
    }

    #[test]
    fn unknown_scoring_and_classification_scores() {
        assert_eq!(Scoring::parse("bogus"), Err(InterpretError::UnknownScoring("bogus".into())));
        for s in ["neg_mean_absolute_error", "neg_mean_squared_error", "neg_root_mean_squared_error", "r2", "accuracy", "f1"] {
            assert_eq!(Scoring::parse(s).unwrap().as_str(), s);
        }
        let a = [0.0, 1.0, 1.0, 0.0];
        let p = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(Scoring::Accuracy.score(&a, &p, 2), 0.75);
        // precision 1, recall 0.5 for the positive class
        assert!((Scoring::F1.score(&a, &p, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((Scoring::NegMeanSquaredError.score(&[1.0, 2.0], &[2.0, 4.0], 0) + 2.5).abs() < 1e-12);
    }
}

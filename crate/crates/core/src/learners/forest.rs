use super::params::{get_opt_usize, get_samples, get_usize, ModelFamily, ParamValue, SampleCount};
use super::tree::{Criterion, Tree, TreeParams};
use super::{check_width, classes_from_proba, Capabilities, FitReport, LearnError, Learner, Params, Result, Task};
use crate::matrix::Matrix;
use crate::rng::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bagged CART trees with per-split feature subsampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_estimators: usize,
    pub min_samples_split: SampleCount,
    pub min_samples_leaf: SampleCount,
    pub max_depth: Option<usize>,
    pub task: Option<Task>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Default for RandomForest {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            min_samples_split: SampleCount::Count(2),
            min_samples_leaf: SampleCount::Count(1),
            max_depth: None,
            task: None,
            n_features: 0,
            trees: Vec::new(),
        }
    }
}

impl RandomForest {
    pub fn from_params(p: &Params) -> Result<Self> {
        let n_estimators = get_usize(p, "n_estimators", 100)?;
        if n_estimators == 0 {
            return Err(LearnError::InvalidParam { name: "n_estimators".into(), reason: "must be ≥ 1".into() });
        }
        Ok(Self {
            n_estimators,
            min_samples_split: get_samples(p, "min_samples_split", 2, 2)?,
            min_samples_leaf: get_samples(p, "min_samples_leaf", 1, 1)?,
            max_depth: get_opt_usize(p, "max_depth")?,
            ..Self::default()
        })
    }

    fn mean_leaf(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if self.trees.is_empty() {
            return Err(LearnError::NotFitted);
        }
        check_width(self.n_features, x)?;
        let t = self.trees.len() as f64;
        Ok(x.rows_iter()
            .map(|row| {
                let mut acc = self.trees[0].leaf_value(row).to_vec();
                for tree in &self.trees[1..] {
                    for (a, v) in acc.iter_mut().zip(tree.leaf_value(row)) {
                        *a += v;
                    }
                }
                acc.iter().map(|a| a / t).collect()
            })
            .collect())
    }
}

impl Learner for RandomForest {
    fn family(&self) -> ModelFamily {
        ModelFamily::RandomForest
    }

    fn params(&self) -> Params {
        Params::from([
            ("n_estimators".to_string(), ParamValue::Int(self.n_estimators as i64)),
            ("min_samples_split".to_string(), self.min_samples_split.to_param()),
            ("min_samples_leaf".to_string(), self.min_samples_leaf.to_param()),
            ("max_depth".to_string(), self.max_depth.map_or(ParamValue::Null, |d| ParamValue::Int(d as i64))),
        ])
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_classification: true, supports_regression: true, exposes_coefficients: false }
    }

    fn fit(&mut self, x: &Matrix, y: &[f64], task: Task, rng: &mut Rng) -> Result<FitReport> {
        let (n, d) = (x.nrows(), x.ncols());
        let (criterion, max_features) = match task {
            Task::Classification { n_classes } => (Criterion::Gini { n_classes }, (d as f64).sqrt().ceil() as usize),
            Task::Regression => (Criterion::Variance, (d as f64 / 3.0).ceil() as usize),
        };
        let params = TreeParams {
            criterion,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split.resolve(n, 2),
            min_samples_leaf: self.min_samples_leaf.resolve(n, 1),
            max_features: Some(max_features.max(1)),
        };
        let base = rng.clone();
        self.trees = (0..self.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut r = base.child(&format!("tree-{t}"));
                let rows: Vec<usize> = (0..n).map(|_| r.below(n)).collect();
                Tree::fit(x, y, &rows, &params, &mut r)
            })
            .collect();
        self.task = Some(task);
        self.n_features = d;
        Ok(FitReport::ok(self.n_estimators))
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self.task {
            Some(Task::Classification { .. }) => Ok(classes_from_proba(&self.predict_proba(x)?)),
            _ => Ok(self.mean_leaf(x)?.into_iter().map(|v| v[0]).collect()),
        }
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        match self.task {
            Some(Task::Classification { .. }) => Ok(Matrix::from_rows(&self.mean_leaf(x)?)),
            Some(Task::Regression) => {
                Err(LearnError::UnsupportedTask { family: "random_forest".into(), task: "probabilities".into() })
            }
            None => Err(LearnError::NotFitted),
        }
    }
}

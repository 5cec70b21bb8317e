use super::params::{get_f64, get_samples, get_usize, ModelFamily, ParamValue, SampleCount};
use super::tree::{Criterion, Tree, TreeParams};
use super::{check_width, classes_from_proba, sigmoid, Capabilities, FitReport, LearnError, Learner, Params, Result, Task};
use crate::matrix::Matrix;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// Stagewise regression trees on loss gradients: squared loss for
/// regression, logistic (binary) or softmax (multiclass) deviance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: SampleCount,
    pub min_samples_leaf: SampleCount,
    pub task: Option<Task>,
    pub n_features: usize,
    /// Initial raw score per output.
    pub init: Vec<f64>,
    /// `stages[s][k]` is the tree for output k at stage s.
    pub stages: Vec<Vec<Tree>>,
    /// Training loss after each stage (mean squared error or mean deviance).
    pub train_loss: Vec<f64>,
}

impl Default for GradientBoosting {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_split: SampleCount::Count(2),
            min_samples_leaf: SampleCount::Count(1),
            task: None,
            n_features: 0,
            init: Vec::new(),
            stages: Vec::new(),
            train_loss: Vec::new(),
        }
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

impl GradientBoosting {
    pub fn from_params(p: &Params) -> Result<Self> {
        let d = Self::default();
        let learning_rate = get_f64(p, "learning_rate", d.learning_rate)?;
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(LearnError::InvalidParam { name: "learning_rate".into(), reason: "must lie in (0, 1]".into() });
        }
        Ok(Self {
            n_estimators: get_usize(p, "n_estimators", d.n_estimators)?,
            learning_rate,
            max_depth: get_usize(p, "max_depth", d.max_depth)?,
            min_samples_split: get_samples(p, "min_samples_split", 2, 2)?,
            min_samples_leaf: get_samples(p, "min_samples_leaf", 1, 1)?,
            ..d
        })
    }

    fn outputs(&self) -> usize {
        self.init.len()
    }

    /// Raw additive scores, one column per output.
    pub fn raw_scores(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if self.task.is_none() {
            return Err(LearnError::NotFitted);
        }
        check_width(self.n_features, x)?;
        Ok(x.rows_iter()
            .map(|row| {
                let mut f = self.init.clone();
                for stage in &self.stages {
                    for (k, t) in stage.iter().enumerate() {
                        f[k] += self.learning_rate * t.leaf_value(row)[0];
                    }
                }
                f
            })
            .collect())
    }

    fn loss(task: Task, y: &[f64], f: &[Vec<f64>]) -> f64 {
        let n = y.len() as f64;
        match task {
            Task::Regression => y.iter().zip(f).map(|(a, s)| (a - s[0]).powi(2)).sum::<f64>() / n,
            Task::Classification { n_classes } if n_classes <= 2 => {
                y.iter()
                    .zip(f)
                    .map(|(&t, s)| {
                        let z = s[0];
                        (if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }) - t * z
                    })
                    .sum::<f64>()
                    / n
            }
            Task::Classification { .. } => {
                y.iter().zip(f).map(|(&t, s)| -softmax(s)[t as usize].max(1e-300).ln()).sum::<f64>() / n
            }
        }
    }
}

impl Learner for GradientBoosting {
    fn family(&self) -> ModelFamily {
        ModelFamily::GradientBoosting
    }

    fn params(&self) -> Params {
        Params::from([
            ("n_estimators".to_string(), ParamValue::Int(self.n_estimators as i64)),
            ("learning_rate".to_string(), ParamValue::Float(self.learning_rate)),
            ("max_depth".to_string(), ParamValue::Int(self.max_depth as i64)),
            ("min_samples_split".to_string(), self.min_samples_split.to_param()),
            ("min_samples_leaf".to_string(), self.min_samples_leaf.to_param()),
        ])
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_classification: true, supports_regression: true, exposes_coefficients: false }
    }

    fn fit(&mut self, x: &Matrix, y: &[f64], task: Task, rng: &mut Rng) -> Result<FitReport> {
        let n = x.nrows();
        let rows: Vec<usize> = (0..n).collect();
        let tp = TreeParams {
            criterion: Criterion::Variance,
            max_depth: Some(self.max_depth),
            min_samples_split: self.min_samples_split.resolve(n, 2),
            min_samples_leaf: self.min_samples_leaf.resolve(n, 1),
            max_features: None,
        };
        let k = match task {
            Task::Regression => 1,
            Task::Classification { n_classes } if n_classes <= 2 => 1,
            Task::Classification { n_classes } => n_classes,
        };
        self.init = match task {
            Task::Regression => vec![y.iter().sum::<f64>() / n as f64],
            Task::Classification { n_classes } if n_classes <= 2 => {
                let p = (y.iter().sum::<f64>() / n as f64).clamp(1e-12, 1.0 - 1e-12);
                vec![(p / (1.0 - p)).ln()]
            }
            Task::Classification { .. } => (0..k)
                .map(|c| (y.iter().filter(|&&v| v == c as f64).count() as f64 / n as f64).max(1e-12).ln())
                .collect(),
        };
        self.task = Some(task);
        self.n_features = x.ncols();
        self.stages.clear();
        self.train_loss.clear();
        let mut f: Vec<Vec<f64>> = vec![self.init.clone(); n];
        for s in 0..self.n_estimators {
            let probs: Vec<Vec<f64>> = match task {
                Task::Regression => Vec::new(),
                _ if k == 1 => f.iter().map(|v| vec![sigmoid(v[0])]).collect(),
                _ => f.iter().map(|v| softmax(v)).collect(),
            };
            let mut stage = Vec::with_capacity(k);
            for c in 0..k {
                let g: Vec<f64> = match task {
                    Task::Regression => y.iter().zip(&f).map(|(a, v)| a - v[0]).collect(),
                    _ if k == 1 => y.iter().zip(&probs).map(|(a, p)| a - p[0]).collect(),
                    _ => y.iter().zip(&probs).map(|(&a, p)| if a == c as f64 { 1.0 } else { 0.0 } - p[c]).collect(),
                };
                let mut tree = Tree::fit(x, &g, &rows, &tp, &mut rng.child(&format!("stage-{s}/{c}")));
                if task.is_classification() {
                    // one Newton step per leaf
                    let mut num = vec![0.0; tree.n_nodes()];
                    let mut den = vec![0.0; tree.n_nodes()];
                    for i in 0..n {
                        let leaf = tree.leaf_index(x.row(i));
                        num[leaf] += g[i];
                        den[leaf] += if k == 1 { probs[i][0] * (1.0 - probs[i][0]) } else { probs[i][c] * (1.0 - probs[i][c]) };
                    }
                    let factor = if k == 1 { 1.0 } else { (k - 1) as f64 / k as f64 };
                    for leaf in 0..tree.n_nodes() {
                        if tree.feature[leaf] < 0 {
                            tree.value[leaf] = vec![if den[leaf] > 1e-150 { factor * num[leaf] / den[leaf] } else { 0.0 }];
                        }
                    }
                }
                stage.push(tree);
            }
            for (i, fi) in f.iter_mut().enumerate() {
                for (c, t) in stage.iter().enumerate() {
                    fi[c] += self.learning_rate * t.leaf_value(x.row(i))[0];
                }
            }
            self.stages.push(stage);
            self.train_loss.push(Self::loss(task, y, &f));
        }
        Ok(FitReport::ok(self.n_estimators))
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self.task {
            Some(Task::Regression) => Ok(self.raw_scores(x)?.into_iter().map(|v| v[0]).collect()),
            Some(_) => Ok(classes_from_proba(&self.predict_proba(x)?)),
            None => Err(LearnError::NotFitted),
        }
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        match self.task {
            Some(Task::Classification { .. }) => {
                let raw = self.raw_scores(x)?;
                let rows: Vec<Vec<f64>> = if self.outputs() == 1 {
                    raw.iter().map(|v| {
                        let p = sigmoid(v[0]);
                        vec![1.0 - p, p]
                    }).collect()
                } else {
                    raw.iter().map(|v| softmax(v)).collect()
                };
                Ok(Matrix::from_rows(&rows))
            }
            Some(Task::Regression) => {
                Err(LearnError::UnsupportedTask { family: "gradient_boosting".into(), task: "probabilities".into() })
            }
            None => Err(LearnError::NotFitted),
        }
    }
}

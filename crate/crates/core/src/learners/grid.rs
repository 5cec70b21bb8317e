use super::metrics::regression_metrics;
use super::params::{check_names, ModelFamily, ParamValue, Params};
use super::{FitReport, LearnError, Learner, Model, Result, Task};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::tabular::{split_indices, SplitPlan};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A model family with its hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    #[serde(default, alias = "params")]
    pub param_grid: BTreeMap<String, Vec<ParamValue>>,
    #[serde(rename = "use", default = "yes")]
    pub use_model: bool,
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Self {
        Self { family, param_grid: BTreeMap::new(), use_model: true }
    }

    pub fn with(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.param_grid.insert(name.to_string(), values);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.use_model && self.param_grid.values().any(Vec::is_empty) {
            return Err(LearnError::EmptyGrid);
        }
        let names: Params = self.param_grid.keys().map(|k| (k.clone(), ParamValue::Null)).collect();
        check_names(self.family, &names)
    }

    /// The first value of every list: the configuration used without search.
    pub fn first_point(&self) -> Params {
        self.param_grid.iter().filter_map(|(k, v)| v.first().map(|x| (k.clone(), x.clone()))).collect()
    }
}

/// Cartesian product of the grid; keys in sorted order, values in list
/// order, last key varying fastest.
pub fn expand_grid(grid: &BTreeMap<String, Vec<ParamValue>>) -> Vec<Params> {
    let mut out = vec![Params::new()];
    for (k, values) in grid {
        out = out
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(k.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub params: Params,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best_params: Params,
    pub best_score: f64,
    pub candidates: Vec<Candidate>,
    pub model: Model,
    pub report: FitReport,
}

fn cv_score(model: &Model, x: &Matrix, y: &[f64], task: Task) -> Result<f64> {
    let p = model.predict(x)?;
    Ok(match task {
        Task::Regression => regression_metrics(y, &p).r2,
        Task::Classification { .. } => p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64,
    })
}

/// Score one configuration on every fold with the rng streams keyed by its
/// grid index.
pub fn score_candidate(
    family: ModelFamily,
    params: &Params,
    index: usize,
    x: &Matrix,
    y: &[f64],
    task: Task,
    folds: &[crate::tabular::Split],
    rng: &Rng,
) -> Result<Vec<f64>> {
    folds
        .iter()
        .enumerate()
        .map(|(f, s)| {
            let mut m = Model::new(family, params)?;
            let ytr: Vec<f64> = s.train.iter().map(|&i| y[i]).collect();
            let yte: Vec<f64> = s.test.iter().map(|&i| y[i]).collect();
            m.fit(&x.select_rows(&s.train), &ytr, task, &mut rng.child(&format!("grid/{index}/fold/{f}")))?;
            cv_score(&m, &x.select_rows(&s.test), &yte, task)
        })
        .collect()
}

/// Exhaustive search scored by mean CV R² (regression) or accuracy
/// (classification); the winner is refit on all of `x`. Ties go to the
/// earliest grid point.
pub fn grid_search(spec: &ModelSpec, x: &Matrix, y: &[f64], task: Task, plan: &SplitPlan, rng: &Rng) -> Result<GridResult> {
    spec.validate()?;
    let points = expand_grid(&spec.param_grid);
    if points.is_empty() {
        return Err(LearnError::EmptyGrid);
    }
    let strata: Option<Vec<usize>> = task.is_classification().then(|| y.iter().map(|&v| v as usize).collect());
    let folds = split_indices(x.nrows(), strata.as_deref(), None, plan).map_err(|e| LearnError::Split(e.to_string()))?;
    let candidates: Vec<Candidate> = points
        .par_iter()
        .enumerate()
        .map(|(g, params)| {
            let fold_scores = score_candidate(spec.family, params, g, x, y, task, &folds, rng)?;
            let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            Ok(Candidate { index: g, params: params.clone(), fold_scores, mean_score })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for c in &candidates {
        info!("grid {} candidate {} {:?}: mean CV score {}", spec.family, c.index, c.params, c.mean_score);
        if c.mean_score > candidates[best].mean_score {
            best = c.index;
        }
    }
    let best_params = candidates[best].params.clone();
    let mut model = Model::new(spec.family, &best_params)?;
    let report = model.fit(x, y, task, &mut rng.child("grid/refit"))?;
    Ok(GridResult {
        best_index: best,
        best_score: candidates[best].mean_score,
        best_params,
        candidates,
        model,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig9c_mlrem() -> ModelSpec {
        ModelSpec::new(ModelFamily::Mlrem)
            .with("alpha", vec![0.05.into(), 0.1.into(), 0.5.into(), 0.8.into()])
            .with("max_beta", vec![40.0.into()])
            .with("weight_threshold", vec![0.001.into()])
            .with("max_iterations", vec![300i64.into()])
            .with("tolerance", vec![0.01.into()])
    }

    fn data() -> (Matrix, Vec<f64>) {
        let mut r = Rng::stream(8, "grid");
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![r.normal(), r.normal()]).collect();
        let y = rows.iter().map(|v| 1.5 * v[0] - v[1]).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn recorded_mlrem_grid_has_four_candidates() {
        let (x, y) = data();
        let g = grid_search(&fig9c_mlrem(), &x, &y, Task::Regression, &SplitPlan::kfold(5, 1), &Rng::stream(1, "g")).unwrap();
        assert_eq!(g.candidates.len(), 4);
    }

    #[test]
    fn single_point_grid() {
        let (x, y) = data();
        let spec = ModelSpec::new(ModelFamily::Mlrem).with("alpha", vec![0.3.into()]);
        let g = grid_search(&spec, &x, &y, Task::Regression, &SplitPlan::kfold(3, 1), &Rng::stream(1, "g")).unwrap();
        assert_eq!(g.best_params["alpha"], ParamValue::Float(0.3));
    }

    #[test]
    fn true_model_dominates_and_score_replays() {
        // noiseless quadratic: only the deep boosted trees can follow it
        let mut r = Rng::stream(2, "gd");
        let rows: Vec<Vec<f64>> = (0..120).map(|_| vec![r.uniform() * 4.0 - 2.0]).collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0] * v[0]).collect();
        let x = Matrix::from_rows(&rows);
        let spec = ModelSpec::new(ModelFamily::GradientBoosting)
            .with("max_depth", vec![1i64.into(), 4i64.into()])
            .with("n_estimators", vec![5i64.into(), 200i64.into()]);
        let plan = SplitPlan::kfold(4, 3);
        let rng = Rng::stream(1, "g");
        let g = grid_search(&spec, &x, &y, Task::Regression, &plan, &rng).unwrap();
        assert_eq!(g.best_params["max_depth"], ParamValue::Int(4));
        assert_eq!(g.best_params["n_estimators"], ParamValue::Int(200));
        let folds = split_indices(120, None, None, &plan).unwrap();
        let again = score_candidate(spec.family, &g.best_params, g.best_index, &x, &y, Task::Regression, &folds, &rng).unwrap();
        assert_eq!(again.iter().sum::<f64>() / again.len() as f64, g.best_score);
    }

    #[test]
    fn grid_errors() {
        let spec = ModelSpec::new(ModelFamily::Mlrem).with("alpha", vec![]);
        assert_eq!(spec.validate(), Err(LearnError::EmptyGrid));
        let spec = ModelSpec::new(ModelFamily::Mlrem).with("n_estimators", vec![1i64.into()]);
        assert!(matches!(spec.validate(), Err(LearnError::UnknownParam { .. })));
    }

    #[test]
    fn recorded_grid_json_parses() {
        let s = r#"{"family": "random forest", "use": true, "params": {"n_estimators": [100, 300, 500], "min_samples_split": [2, 0.05, 0.1], "min_samples_leaf": [1, 0.05, 0.1], "max_depth": [null, 3, 6]}}"#;
        let spec: ModelSpec = serde_json::from_str(s).unwrap();
        assert_eq!(expand_grid(&spec.param_grid).len(), 81);
        spec.validate().unwrap();
    }
}

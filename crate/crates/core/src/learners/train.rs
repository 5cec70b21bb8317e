use super::grid::{grid_search, Candidate, ModelSpec};
use super::metrics::{classification_metrics, regression_metrics, roc_curve, summarise_sets, MetricSet, Metrics};
use super::params::{ModelFamily, Params};
use super::{Coefficients, FitReport, LearnError, Learner, Model, Result, Task};
use crate::matrix::Matrix;
use crate::preprocess::TransformPipeline;
use crate::rng::Rng;
use crate::stats::{PlotKind, PlotSpec, Series};
use crate::tabular::{format_f64, make_splits, Dataset, ProblemType, Split, SplitMethod, SplitPlan};
use log::info;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub models: Vec<ModelSpec>,
    pub use_hyperparam_search: bool,
    /// Folds for the inner search on each training set.
    pub inner_folds: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { models: Vec::new(), use_hyperparam_search: true, inner_folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: usize,
    pub train: MetricSet,
    pub test: MetricSet,
}

/// A fitted model with everything needed to report on and reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub name: String,
    pub family: ModelFamily,
    pub chosen_params: Params,
    pub model: Model,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_labels: Option<Vec<String>>,
    pub per_split: Vec<SplitMetrics>,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Coefficients>>,
    /// Search candidates for the final model, when a search ran.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<Candidate>,
    pub fit_report: FitReport,
}

impl TrainedModel {
    /// Predictions on pipeline-transformed features, returned in original
    /// target units (class indices for classification).
    pub fn predict_original(&self, x: &Matrix, pipeline: &TransformPipeline) -> Result<Vec<f64>> {
        let p = self.model.predict(x)?;
        Ok(match self.task {
            Task::Regression => pipeline.inverse_target(&p),
            Task::Classification { .. } => p,
        })
    }

    fn render(&self, v: f64) -> String {
        match &self.class_labels {
            Some(l) => l.get(v as usize).cloned().unwrap_or_else(|| format_f64(v)),
            None => format_f64(v),
        }
    }

    /// Rows of `name,mean,sd,n` for the given set.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("model,set,metric,mean,sd,n\n");
        for (set, m) in [("train", &self.train_metrics), ("test", &self.test_metrics)] {
            for (k, s) in m {
                out.push_str(&format!("{},{set},{k},{},{},{}\n", self.name, format_f64(s.mean), format_f64(s.sd), s.n));
            }
        }
        out
    }
}

/// Header plus string rows; numbers use shortest round-trip formatting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PredictionTable {
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub models: Vec<TrainedModel>,
    pub predictions: PredictionTable,
    pub splits: Vec<Split>,
    /// (model name, plot)
    pub plots: Vec<(String, PlotSpec)>,
}

fn task_of(ds: &Dataset) -> Task {
    match ds.problem_type() {
        ProblemType::Regression => Task::Regression,
        ProblemType::Classification => Task::Classification { n_classes: ds.n_classes() },
    }
}

fn name_columns(e: LearnError, names: &[String]) -> LearnError {
    match e {
        LearnError::RankDeficient(idx) => LearnError::RankDeficient(
            idx.iter().map(|i| i.parse::<usize>().ok().and_then(|j| names.get(j).cloned()).unwrap_or_else(|| i.clone())).collect(),
        ),
        other => other,
    }
}

struct Fitted {
    model: Model,
    params: Params,
    grid: Vec<Candidate>,
    report: FitReport,
}

fn fit_one(spec: &ModelSpec, opts: &TrainOptions, x: &Matrix, y: &[f64], task: Task, seed: u64, rng: &Rng) -> Result<Fitted> {
    let searching = opts.use_hyperparam_search && spec.param_grid.values().map(Vec::len).product::<usize>() > 1;
    if searching {
        let inner = SplitPlan::kfold(opts.inner_folds.clamp(2, x.nrows().max(2)), seed);
        let g = grid_search(spec, x, y, task, &inner, rng)?;
        return Ok(Fitted { model: g.model, params: g.best_params, grid: g.candidates, report: g.report });
    }
    let params = spec.first_point();
    let mut model = Model::new(spec.family, &params)?;
    let report = model.fit(x, y, task, &mut rng.child("fit"))?;
    Ok(Fitted { model, params, grid: Vec::new(), report })
}

fn split_metrics(task: Task, actual: &[f64], pred: &[f64], proba: Option<Matrix>) -> MetricSet {
    match task {
        Task::Regression => regression_metrics(actual, pred).to_set(),
        Task::Classification { n_classes } => {
            let a: Vec<usize> = actual.iter().map(|&v| v as usize).collect();
            let p: Vec<usize> = pred.iter().map(|&v| v as usize).collect();
            let pr: Vec<Vec<f64>> = proba.map(|m| m.rows_iter().map(<[f64]>::to_vec).collect()).unwrap_or_default();
            classification_metrics(&a, &p, &pr, n_classes)
        }
    }
}

/// Fit every selected model on every split of `plan`, report metrics in
/// original target units and build the per-row prediction table.
pub fn train_models(ds: &Dataset, pipeline: &TransformPipeline, plan: &SplitPlan, opts: &TrainOptions) -> Result<TrainOutput> {
    let transformed = pipeline.apply(ds).map_err(|e| LearnError::Preprocess(e.to_string()))?;
    let x = transformed.features();
    let z = transformed.target();
    let y = ds.target();
    let task = task_of(ds);
    let names = transformed.feature_names();
    let splits = make_splits(ds, plan).map_err(|e| LearnError::Split(e.to_string()))?;
    let labels = ds.class_labels().map(<[String]>::to_vec);
    let base = Rng::stream(plan.seed, "train");

    let mut models = Vec::new();
    let mut per_model_preds: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::new();
    let mut plots = Vec::new();
    for spec in opts.models.iter().filter(|s| s.use_model) {
        spec.validate()?;
        let name = spec.family.as_str().to_string();
        let mut per_split = Vec::new();
        let mut preds = Vec::new();
        let mut final_fit = None;
        let mut roc_scores: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut parity = (Vec::new(), Vec::new(), Vec::new());
        for (s, split) in splits.iter().enumerate() {
            let rng = base.child(&format!("{name}/split/{s}"));
            let ztr: Vec<f64> = split.train.iter().map(|&i| z[i]).collect();
            let xtr = x.select_rows(&split.train);
            let xte = x.select_rows(&split.test);
            let fitted = fit_one(spec, opts, &xtr, &ztr, task, plan.seed, &rng).map_err(|e| name_columns(e, &names))?;
            let out = |m: &Model, xx: &Matrix| -> Result<Vec<f64>> {
                let p = m.predict(xx)?;
                Ok(if task.is_classification() { p } else { pipeline.inverse_target(&p) })
            };
            let (ptr, pte) = (out(&fitted.model, &xtr)?, out(&fitted.model, &xte)?);
            let ytr: Vec<f64> = split.train.iter().map(|&i| y[i]).collect();
            let yte: Vec<f64> = split.test.iter().map(|&i| y[i]).collect();
            let (ptr_proba, pte_proba) = if task.is_classification() {
                (Some(fitted.model.predict_proba(&xtr)?), Some(fitted.model.predict_proba(&xte)?))
            } else {
                (None, None)
            };
            if let Some(p) = &pte_proba {
                roc_scores.extend(yte.iter().zip(p.rows_iter()).map(|(&a, r)| (a, r.to_vec())));
            }
            for (set, a, p) in [("train", &ytr, &ptr), ("test", &yte, &pte)] {
                parity.0.extend_from_slice(a);
                parity.1.extend_from_slice(p);
                parity.2.extend(std::iter::repeat_n(set.to_string(), a.len()));
            }
            per_split.push(SplitMetrics {
                split: s,
                train: split_metrics(task, &ytr, &ptr, ptr_proba),
                test: split_metrics(task, &yte, &pte, pte_proba),
            });
            info!("trained {name} on split {s}: test {:?}", per_split[s].test);
            preds.push((ptr, pte));
            if matches!(plan.method, SplitMethod::None | SplitMethod::Holdout) {
                final_fit = Some(fitted);
            }
        }
        let fitted = match final_fit {
            Some(f) => f,
            None => fit_one(spec, opts, &x, &z, task, plan.seed, &base.child(&format!("{name}/final")))
                .map_err(|e| name_columns(e, &names))?,
        };
        let train_sets: Vec<MetricSet> = per_split.iter().map(|m| m.train.clone()).collect();
        let test_sets: Vec<MetricSet> = per_split.iter().map(|m| m.test.clone()).collect();
        let coefficients = fitted.model.coefficients();
        plots.push((name.clone(), performance_plot(&name, task, &parity, &roc_scores, labels.as_deref())));
        models.push(TrainedModel {
            name,
            family: spec.family,
            chosen_params: fitted.params,
            model: fitted.model,
            feature_names: names.clone(),
            target_name: ds.target_name().to_string(),
            task,
            class_labels: labels.clone(),
            per_split,
            train_metrics: summarise_sets(&train_sets),
            test_metrics: summarise_sets(&test_sets),
            coefficients,
            grid: fitted.grid,
            fit_report: fitted.report,
        });
        per_model_preds.push(preds);
    }

    let mut header = vec!["split".to_string(), "set".into(), "row_id".into(), "actual".into()];
    header.extend(models.iter().map(|m| m.name.clone()));
    let render_actual = |v: f64| match &labels {
        Some(l) => l[v as usize].clone(),
        None => format_f64(v),
    };
    let mut rows = Vec::new();
    for (s, split) in splits.iter().enumerate() {
        for (set, idx) in [("train", &split.train), ("test", &split.test)] {
            for (k, &i) in idx.iter().enumerate() {
                let mut r = vec![s.to_string(), set.to_string(), i.to_string(), render_actual(y[i])];
                for (m, p) in models.iter().zip(&per_model_preds) {
                    let v = if set == "train" { p[s].0[k] } else { p[s].1[k] };
                    r.push(m.render(v));
                }
                rows.push(r);
            }
        }
    }
    Ok(TrainOutput { models, predictions: PredictionTable { header, rows }, splits, plots })
}

fn performance_plot(
    name: &str,
    task: Task,
    parity: &(Vec<f64>, Vec<f64>, Vec<String>),
    roc: &[(f64, Vec<f64>)],
    labels: Option<&[String]>,
) -> PlotSpec {
    match task {
        Task::Regression => PlotSpec::new(PlotKind::Parity, format!("Parity plot: {name}"), "Actual", "Predicted")
            .with_series(Series::vector("actual", parity.0.clone()))
            .with_series(Series::vector("predicted", parity.1.clone()))
            .with_series(Series::labels("set", parity.2.clone())),
        Task::Classification { n_classes } => {
            let mut spec = PlotSpec::new(PlotKind::RocCurve, format!("ROC curve: {name}"), "False positive rate", "True positive rate");
            let classes: Vec<usize> = if n_classes <= 2 { vec![1] } else { (0..n_classes).collect() };
            for c in classes {
                let lab: Vec<bool> = roc.iter().map(|(a, _)| *a as usize == c).collect();
                let sc: Vec<f64> = roc.iter().map(|(_, p)| p[c]).collect();
                let (fpr, tpr) = roc_curve(&lab, &sc).unwrap_or((vec![0.0, 1.0], vec![0.0, 1.0]));
                let suffix = if n_classes <= 2 {
                    String::new()
                } else {
                    format!("/{}", labels.and_then(|l| l.get(c).cloned()).unwrap_or_else(|| c.to_string()))
                };
                spec.series.push(Series::vector(format!("fpr{suffix}"), fpr));
                spec.series.push(Series::vector(format!("tpr{suffix}"), tpr));
            }
            spec
        }
    }
}

/// Apply the experiment's fitted pipeline to new rows and predict with each
/// model. Output columns: `row_id`, then one per model.
pub fn predict_unseen(
    models: &[TrainedModel],
    pipeline: &TransformPipeline,
    feature_names: &[String],
    x: &Matrix,
) -> Result<PredictionTable> {
    if models.is_empty() {
        return Err(LearnError::ModelNotFound("no models selected".into()));
    }
    let xt = pipeline.apply_features(feature_names, x).map_err(|e| match e {
        crate::preprocess::PreprocessError::MissingFeature(f) => LearnError::MissingFeature(f),
        other => LearnError::Preprocess(other.to_string()),
    })?;
    let preds: Vec<Vec<f64>> = models.iter().map(|m| m.predict_original(&xt, pipeline)).collect::<Result<_>>()?;
    let mut header = vec!["row_id".to_string()];
    header.extend(models.iter().map(|m| m.name.clone()));
    let rows = (0..x.nrows())
        .map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(models.iter().zip(&preds).map(|(m, p)| m.render(p[i])));
            r
        })
        .collect();
    Ok(PredictionTable { header, rows })
}

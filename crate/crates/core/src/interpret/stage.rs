use super::{
    fuse_majority_vote, fuse_mean, global_shap, lime_explain, permutation_importance, sample_background, ImportanceConfig,
    ImportanceTensor, InterpretError, Predictor, Result, Scope, Scoring, Vote,
};
use crate::learners::{Learner, Task, TrainedModel};
use crate::matrix::{mean_sd, Matrix};
use crate::preprocess::TransformPipeline;
use crate::rng::Rng;
use crate::stats::{PlotKind, PlotSpec, Series};
use crate::tabular::{format_f64, Dataset};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiOutput {
    pub global: ImportanceTensor,
    pub local: ImportanceTensor,
    /// Repeat sd of permutation importance, keyed by model.
    pub permutation_sd: BTreeMap<String, Vec<f64>>,
    pub scoring: Option<String>,
    pub ensemble_mean: Option<Vec<f64>>,
    pub votes: Option<Vec<Vote>>,
    /// Dataset rows explained by the local methods.
    pub local_rows: Vec<usize>,
    /// (file name, CSV contents) destined for the results directory.
    pub tables: Vec<(String, String)>,
    pub plots: Vec<(String, PlotSpec)>,
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 input")
}

fn bar_plot(title: String, features: &[String], values: &[f64], errors: Option<&[f64]>, top: usize) -> PlotSpec {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    idx.truncate(top);
    let mut spec = PlotSpec::new(PlotKind::Bar, title, "Feature", "Importance")
        .with_series(Series::vector("values", idx.iter().map(|&j| values[j]).collect()))
        .with_series(Series::labels("labels", idx.iter().map(|&j| features[j].clone()).collect()));
    if let Some(e) = errors {
        spec = spec.with_series(Series::vector("errors", idx.iter().map(|&j| e[j]).collect()));
    }
    spec
}

/// Scoring actually used: classification falls back to accuracy when the
/// configured scoring is a regression metric, and vice versa to the default.
fn effective_scoring(config: &ImportanceConfig, task: Task) -> Result<Scoring> {
    let s = Scoring::parse(&config.permutation_scoring)?;
    Ok(match (task.is_classification(), s.is_classification()) {
        (true, false) => Scoring::Accuracy,
        (false, true) => Scoring::NegMeanAbsoluteError,
        _ => s,
    })
}

/// Global and local importances for every trained model on the whole
/// (pipeline-transformed) dataset, plus the fused ensemble.
pub fn run_interpretation(
    ds: &Dataset,
    pipeline: &TransformPipeline,
    models: &[TrainedModel],
    config: &ImportanceConfig,
    seed: u64,
) -> Result<FiOutput> {
    config.validate()?;
    if models.is_empty() {
        return Err(InterpretError::InvalidConfig("no trained models".into()));
    }
    let transformed = pipeline.apply(ds).map_err(|e| InterpretError::InvalidConfig(e.to_string()))?;
    let x = transformed.features();
    let y = ds.target();
    let features = transformed.feature_names();
    let d = features.len();
    let n = x.nrows();
    let base = Rng::stream(seed, "interpret");
    let background = sample_background(&x, config.shap_background_size, &mut base.child("background"));
    let mut local_rows = if n <= config.local_instances {
        (0..n).collect::<Vec<_>>()
    } else {
        base.child("local-rows").sample_without_replacement(n, config.local_instances)
    };
    local_rows.sort_unstable();
    let x_local = x.select_rows(&local_rows);
    let train_sd: Vec<f64> = (0..d).map(|j| mean_sd(&x.column(j)).1).collect();
    let samples = config.shap_coalition_samples.unwrap_or(2 * d + 2048);

    let mut global = ImportanceTensor::new(Scope::Global, features.clone());
    let mut local = ImportanceTensor::new(Scope::Local, features.clone());
    let mut permutation_sd = BTreeMap::new();
    let mut scoring_used = None;
    let mut tables = Vec::new();
    let mut plots = Vec::new();

    for tm in models {
        let name = tm.name.as_str();
        let m = &tm.model;
        let task = tm.task;
        let rng = base.child(name);
        // explained output per row: prediction in target units, or the
        // probability of the class predicted for that row
        let classes: Option<Vec<usize>> = if task.is_classification() {
            Some(m.predict(&x_local)?.iter().map(|&c| c as usize).collect())
        } else {
            None
        };
        let regression_out = |xx: &Matrix| -> std::result::Result<Vec<f64>, _> { Ok(pipeline.inverse_target(&m.predict(xx)?)) };
        let for_local = |k: usize| -> Box<Predictor> {
            match &classes {
                Some(c) => {
                    let c = c[k];
                    Box::new(move |xx: &Matrix| m.output(xx, Some(c)))
                }
                None => Box::new(regression_out),
            }
        };

        if config.global_methods.permutation {
            let scoring = effective_scoring(config, task)?;
            scoring_used = Some(scoring.as_str().to_string());
            let predict = |xx: &Matrix| tm.predict_original(xx, pipeline);
            let res = permutation_importance(&predict, &x, &y, scoring, task.n_classes(), config.permutation_repeats, &rng.child("permutation"))?;
            info!("permutation importance for {name}: baseline {} = {}", scoring.as_str(), res.baseline);
            let rows = (0..d).map(|j| vec![features[j].clone(), format_f64(res.mean[j]), format_f64(res.sd[j])]).collect::<Vec<_>>();
            tables.push((format!("permutation_{name}.csv"), csv_string(&["feature".into(), "importance".into(), "sd".into()], &rows)));
            plots.push((format!("permutation_{name}"), bar_plot(format!("Permutation importance: {name}"), &features, &res.mean, Some(&res.sd), config.num_features_to_plot)));
            global.push("permutation", name, None, res.mean)?;
            permutation_sd.insert(name.to_string(), res.sd);
        }

        let needs_shap = config.global_methods.shap || config.local_methods.shap;
        let shap_local = if needs_shap {
            let (g, loc) = global_shap(for_local, &x_local, &background, samples, &rng.child("shap"))?;
            if config.global_methods.shap {
                let rows = (0..d).map(|j| vec![features[j].clone(), format_f64(g[j])]).collect::<Vec<_>>();
                tables.push((format!("shap_{name}.csv"), csv_string(&["feature".into(), "importance".into()], &rows)));
                plots.push((format!("shap_{name}"), bar_plot(format!("Mean |SHAP|: {name}"), &features, &g, None, config.num_features_to_plot)));
                global.push("shap", name, None, g)?;
            }
            Some(loc)
        } else {
            None
        };

        let mut local_tables: Vec<(&str, Vec<Vec<f64>>)> = Vec::new();
        if config.local_methods.lime {
            let lime_rng = rng.child("lime");
            let w: Vec<Vec<f64>> = (0..local_rows.len())
                .into_par_iter()
                .map(|k| {
                    let f = for_local(k);
                    lime_explain(&*f, x_local.row(k), &train_sd, config.lime_samples, &mut lime_rng.child(&format!("instance-{}", local_rows[k])))
                })
                .collect::<Result<_>>()?;
            local_tables.push(("lime", w));
        }
        if config.local_methods.shap {
            if let Some(loc) = &shap_local {
                local_tables.push(("shap", loc.iter().map(|e| e.phi.clone()).collect()));
            }
        }
        for (method, w) in local_tables {
            let mut header = vec!["row_id".to_string()];
            header.extend(features.iter().cloned());
            let rows: Vec<Vec<String>> = w
                .iter()
                .zip(&local_rows)
                .map(|(r, &i)| std::iter::once(i.to_string()).chain(r.iter().map(|v| format_f64(*v))).collect())
                .collect();
            tables.push((format!("local_{method}_{name}.csv"), csv_string(&header, &rows)));
            for (r, &i) in w.into_iter().zip(&local_rows) {
                local.push(method, name, Some(i), r)?;
            }
        }
    }

    let (ensemble_mean, votes) = if global.slices.is_empty() {
        (None, None)
    } else {
        let mean = config.ensemble.mean.then(|| fuse_mean(&global)).transpose()?;
        if let Some(mv) = &mean {
            let rows = (0..d).map(|j| vec![features[j].clone(), format_f64(mv[j])]).collect::<Vec<_>>();
            tables.push(("ensemble_mean.csv".into(), csv_string(&["feature".into(), "importance".into()], &rows)));
            plots.push(("ensemble_mean".into(), bar_plot("Ensemble mean importance".into(), &features, mv, None, config.num_features_to_plot)));
        }
        let votes = config.ensemble.majority_vote.then(|| fuse_majority_vote(&global, config.majority_vote_k.min(d))).transpose()?;
        if let Some(v) = &votes {
            let rows = v.iter().map(|v| vec![v.feature.clone(), v.votes.to_string(), format_f64(v.mean_importance)]).collect::<Vec<_>>();
            tables.push(("ensemble_votes.csv".into(), csv_string(&["feature".into(), "votes".into(), "mean_importance".into()], &rows)));
        }
        (mean, votes)
    };
    Ok(FiOutput { global, local, permutation_sd, scoring: scoring_used, ensemble_mean, votes, local_rows, tables, plots })
}

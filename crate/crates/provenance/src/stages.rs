use super::events::EventLog;
use super::layout::{file_safe, list_files, PIPELINE, PREPROCESSED_DATA};
use super::store::{Experiment, Status};
use super::{io_err, FiOptions, MlOptions, PreprocessingOptions, ProvenanceError, Result};
use helixforge_core::fuzzy::{extract_rules, render_rules, rules_csv, FuzzyError, RuleInput, NO_RULES};
use helixforge_core::interpret::run_interpretation;
use helixforge_core::learners::{predict_unseen, LearnError, PredictionTable, TrainedModel};
use helixforge_core::preprocess::{build_pipeline, TransformPipeline};
use helixforge_core::stats::{
    correlation_heatmap, distribution_plot, pairplot, render_svg, summarize, tsne_embed, tsne_plot, PlotOptions, PlotSpec, SummaryStats,
    TsneOptions,
};
use helixforge_core::tabular::{format_f64, SplitPlan};
use helixforge_core::{Dataset, Matrix, ProblemType, Rng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fs;

/// A file produced by a stage, relative to the experiment root.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self { path: path.into(), bytes: bytes.into() }
    }
}

fn invalid(what: &str) -> impl Fn(String) -> ProvenanceError + '_ {
    move |e| ProvenanceError::Invalid(format!("{what}: {e}"))
}

fn learn_err(e: LearnError) -> ProvenanceError {
    match e {
        LearnError::MissingFeature(f) => ProvenanceError::Invalid(format!("MissingFeature: `{f}` is required by the trained models")),
        other => ProvenanceError::Invalid(other.to_string()),
    }
}

/// JSON spec plus, when plots are saved, its SVG rendering.
fn plot_artifacts(dir: &str, spec: PlotSpec, options: &PlotOptions) -> Result<Vec<Artifact>> {
    let spec = spec.with_options(options);
    let stem = file_safe(&spec.file_stem());
    let mut out = vec![Artifact::new(format!("{dir}/{stem}.json"), spec.to_json() + "\n")];
    if options.save_all {
        let svg = render_svg(&spec).map_err(|e| ProvenanceError::Invalid(format!("plot {stem}: {e}")))?;
        out.push(Artifact::new(format!("{dir}/{stem}.svg"), svg));
    }
    Ok(out)
}

pub(crate) fn preprocess(ds: &Dataset, opts: &PreprocessingOptions, log: &mut EventLog) -> Result<Vec<Artifact>> {
    let pipe = build_pipeline(&opts.config, ds).map_err(|e| invalid("preprocessing")(e.to_string()))?;
    for step in &pipe.steps {
        log.info(format!("step {}", serde_json::to_string(step).expect("steps serialise")))?;
    }
    let dropped: Vec<&String> = pipe.input_features.iter().filter(|f| !pipe.surviving_features.contains(f)).collect();
    log.info(format!("{} of {} features survive; dropped {:?}", pipe.surviving_features.len(), pipe.input_features.len(), dropped))?;
    let processed = pipe.apply(ds).map_err(|e| invalid("preprocessing")(e.to_string()))?;
    Ok(vec![Artifact::new(PREPROCESSED_DATA, processed.to_csv_string()), Artifact::new(PIPELINE, pipe.to_json() + "\n")])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualiseOutput {
    /// Keyed by "raw" and, after preprocessing, "processed".
    pub summaries: BTreeMap<String, SummaryStats>,
    pub plots: Vec<PlotSpec>,
}

const MAX_DISTRIBUTIONS: usize = 30;
const PAIRPLOT_COLUMNS: usize = 5;
const TSNE_MIN_ROWS: usize = 16;

fn data_plots(ds: &Dataset, tag: &str, seed: u64, log: &mut EventLog) -> Result<Vec<PlotSpec>> {
    let mut plots = Vec::new();
    match correlation_heatmap(ds) {
        Ok(p) => plots.push(p.with_provenance(tag)),
        Err(e) => log.warn(format!("{tag} heatmap skipped: {e}"))?,
    }
    let numeric: Vec<String> = ds.columns().iter().filter(|c| c.is_numeric()).map(|c| c.name.clone()).collect();
    for name in numeric.iter().take(MAX_DISTRIBUTIONS) {
        match distribution_plot(ds, name) {
            Ok(p) => plots.push(p.with_provenance(format!("{tag}-{name}"))),
            Err(e) => log.warn(format!("{tag} distribution of {name} skipped: {e}"))?,
        }
    }
    if numeric.len() > MAX_DISTRIBUTIONS {
        log.info(format!("{tag}: distributions drawn for the first {MAX_DISTRIBUTIONS} numeric columns"))?;
    }
    let cols: Vec<String> = numeric.iter().take(PAIRPLOT_COLUMNS).cloned().collect();
    match pairplot(ds, &cols) {
        Ok(p) => plots.push(p.with_provenance(tag)),
        Err(e) => log.warn(format!("{tag} pairplot skipped: {e}"))?,
    }
    if ds.n_rows() >= TSNE_MIN_ROWS && ds.n_features() > 0 {
        // standardised features, so no single unit dominates the distances
        let x = ds.features();
        let cols: Vec<Vec<f64>> = (0..x.ncols())
            .map(|j| {
                let c = x.column(j);
                let (m, s) = helixforge_core::matrix::mean_sd(&c);
                c.iter().map(|v| if s > 0.0 { (v - m) / s } else { 0.0 }).collect()
            })
            .collect();
        let z = Matrix::from_columns(&cols);
        match tsne_embed(&z, &TsneOptions::for_n(z.nrows()), &mut Rng::stream(seed, &format!("tsne/{tag}"))) {
            Ok(res) => {
                let labels = ds.class_labels().map(|l| ds.target().iter().map(|&v| l[v as usize].clone()).collect());
                log.info(format!("{tag} t-SNE final KL {:?}", res.kl_history.last().map(|k| k.1)))?;
                plots.push(tsne_plot(&res, labels, &format!("t-SNE: {}", ds.name)).with_provenance(tag));
            }
            Err(e) => log.warn(format!("{tag} t-SNE skipped: {e}"))?,
        }
    }
    Ok(plots)
}

pub(crate) fn visualise(
    ds: &Dataset,
    pipeline: Option<&TransformPipeline>,
    options: &PlotOptions,
    seed: u64,
    log: &mut EventLog,
) -> Result<(VisualiseOutput, Vec<Artifact>)> {
    let mut sets = vec![("raw", ds.clone())];
    if let Some(p) = pipeline {
        sets.push(("processed", p.apply(ds).map_err(|e| invalid("preprocessing")(e.to_string()))?));
    }
    let mut view = VisualiseOutput { summaries: BTreeMap::new(), plots: Vec::new() };
    let mut out = Vec::new();
    for (tag, d) in sets {
        let summary = summarize(&d);
        out.push(Artifact::new(format!("plots/data/summary_{tag}.csv"), summary.to_csv_string()));
        view.summaries.insert(tag.to_string(), summary);
        for p in data_plots(&d, tag, seed, log)? {
            let p = p.with_options(options);
            out.extend(plot_artifacts("plots/data", p.clone(), options)?);
            view.plots.push(p);
        }
    }
    Ok((view, out))
}

pub(crate) fn train(
    ds: &Dataset,
    pipeline: &TransformPipeline,
    plan: &SplitPlan,
    opts: &MlOptions,
    plot_options: &PlotOptions,
    write_pipeline: bool,
    log: &mut EventLog,
) -> Result<Vec<Artifact>> {
    let train_opts = opts.train_options()?;
    let out = helixforge_core::learners::train_models(ds, pipeline, plan, &train_opts).map_err(learn_err)?;
    let mut artifacts = Vec::new();
    if write_pipeline {
        artifacts.push(Artifact::new(PIPELINE, pipeline.to_json() + "\n"));
    }
    artifacts.push(Artifact::new("results/ml/predictions.csv", out.predictions.to_csv_string()));
    let mut summary = serde_json::Map::new();
    for m in &out.models {
        for w in &m.fit_report.warnings {
            log.warn(format!("{}: {w}", m.name))?;
        }
        let test = m.test_metrics.iter().map(|(k, v)| format!("{k}={}", format_f64(v.mean))).collect::<Vec<_>>().join(" ");
        log.info(format!("{} params {} test {}", m.name, serde_json::to_string(&m.chosen_params).expect("params serialise"), test))?;
        if !m.grid.is_empty() {
            log.info(format!("{} grid search evaluated {} candidates", m.name, m.grid.len()))?;
        }
        artifacts.push(Artifact::new(format!("results/ml/metrics_{}.csv", m.name), m.metrics_csv()));
        summary.insert(
            m.name.clone(),
            json!({
                "family": m.family,
                "chosen_params": m.chosen_params,
                "train_metrics": m.train_metrics,
                "test_metrics": m.test_metrics,
                "per_split": m.per_split,
                "coefficients": m.coefficients,
                "feature_names": m.feature_names,
                "fit_report": m.fit_report,
                "grid_candidates": m.grid.len(),
            }),
        );
        if opts.save_models {
            let text = serde_json::to_string(m).expect("models serialise");
            artifacts.push(Artifact::new(format!("models/{}.json", m.name), text + "\n"));
        }
    }
    artifacts.push(Artifact::new("results/ml/summary.json", serde_json::to_string_pretty(&Value::Object(summary)).expect("json") + "\n"));
    if opts.save_actual_pred_plots {
        for (name, spec) in out.plots {
            artifacts.extend(plot_artifacts("plots/ml", spec.with_provenance(name), plot_options)?);
        }
    }
    Ok(artifacts)
}

pub(crate) fn interpret(
    ds: &Dataset,
    pipeline: &TransformPipeline,
    models: &[TrainedModel],
    opts: &FiOptions,
    plot_options: &PlotOptions,
    seed: u64,
    log: &mut EventLog,
) -> Result<Vec<Artifact>> {
    let fi = run_interpretation(ds, pipeline, models, &opts.importance, seed).map_err(|e| invalid("interpretation")(e.to_string()))?;
    if let Some(s) = &fi.scoring {
        log.info(format!("permutation scoring {s}"))?;
    }
    log.info(format!("explained {} rows locally", fi.local_rows.len()))?;
    let mut artifacts: Vec<Artifact> = fi.tables.iter().map(|(n, c)| Artifact::new(format!("results/fi/{n}"), c.clone())).collect();
    for (name, spec) in &fi.plots {
        artifacts.extend(plot_artifacts("plots/fi", spec.clone().with_provenance(name.clone()), plot_options)?);
    }

    // rules are phrased over the original values of the surviving features
    let features = pipeline.surviving_features.clone();
    let raw = ds.with_features(&features).map_err(|e| invalid("interpretation")(e.to_string()))?;
    let x = raw.features();
    let y = ds.target();
    let input = RuleInput { features: &features, x: &x, target: &y, target_name: ds.target_name(), class_labels: ds.class_labels() };
    let rules = match extract_rules(&fi.local, &input, &opts.fuzzy, fi.ensemble_mean.as_deref()) {
        Ok(r) => r,
        Err(FuzzyError::NoRulesAboveSupport(s)) => {
            log.warn(format!("no fuzzy rule reached support {s}"))?;
            Vec::new()
        }
        Err(FuzzyError::NoLocalImportances(m)) => {
            log.warn(format!("fuzzy rules skipped: no local {m} importances"))?;
            Vec::new()
        }
        Err(e) => return Err(ProvenanceError::Invalid(format!("fuzzy: {e}"))),
    };
    if rules.is_empty() {
        log.info(NO_RULES)?;
    }
    artifacts.push(Artifact::new("results/fi/fuzzy_rules.txt", render_rules(&rules, opts.fuzzy.top_rules)));
    artifacts.push(Artifact::new("results/fi/fuzzy_rules.csv", rules_csv(&rules)));
    let summary = json!({
        "features": features,
        "global": fi.global,
        "permutation_sd": fi.permutation_sd,
        "scoring": fi.scoring,
        "ensemble_mean": fi.ensemble_mean,
        "votes": fi.votes,
        "local_rows": fi.local_rows,
        "rules": rules,
    });
    artifacts.push(Artifact::new("results/fi/summary.json", serde_json::to_string_pretty(&summary).expect("json") + "\n"));
    Ok(artifacts)
}

/// Header-first numeric CSV of features only.
fn read_feature_csv(csv: &[u8]) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(csv);
    let header: Vec<String> = rdr.headers().map_err(|e| invalid("csv")(e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| invalid("csv")(e.to_string()))?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                ProvenanceError::Invalid(format!("csv: non-numeric cell in column `{}` at line {}", header[j], i + 2))
            })?;
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(ProvenanceError::Invalid("csv: no data rows".into()));
    }
    Ok((header.clone(), Matrix::from_vec(n, header.len(), data)))
}

pub(crate) fn predict(models: &[TrainedModel], pipeline: &TransformPipeline, csv: &[u8]) -> Result<PredictionTable> {
    let (names, x) = read_feature_csv(csv)?;
    predict_unseen(models, pipeline, &names, &x).map_err(learn_err)
}

pub(crate) fn stored_visualisation(exp: &Experiment) -> Result<Option<VisualiseOutput>> {
    let dir = exp.root().join("plots/data");
    let files = list_files(&dir)?;
    let mut plots = Vec::new();
    for rel in files.iter().filter(|r| r.extension().and_then(|e| e.to_str()) == Some("json")) {
        let p = dir.join(rel);
        let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        plots.push(PlotSpec::from_json(&text).map_err(|e| ProvenanceError::CorruptLayout(format!("plots/data/{}: {e}", rel.display())))?);
    }
    if plots.is_empty() {
        return Ok(None);
    }
    // summaries are cheap and pure, so they are recomputed rather than parsed back
    let ds = exp.dataset()?;
    let mut summaries = BTreeMap::from([("raw".to_string(), summarize(&ds))]);
    if exp.record().preprocessing.is_some() {
        let pipe = exp.pipeline(&ds)?;
        summaries.insert("processed".into(), summarize(&pipe.apply(&ds).map_err(|e| invalid("preprocessing")(e.to_string()))?));
    }
    Ok(Some(VisualiseOutput { summaries, plots }))
}

/// Everything the results page shows, read back from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsView {
    pub name: String,
    pub status: Status,
    pub problem_type: ProblemType,
    pub ml: Option<Value>,
    pub fi: Option<Value>,
    /// CSV and text artifacts under results/, keyed by relative path.
    pub files: BTreeMap<String, String>,
    pub plots: Vec<PlotSpec>,
}

pub(crate) fn results_view(exp: &Experiment) -> Result<ResultsView> {
    let root = exp.root();
    let read_json = |rel: &str| -> Result<Option<Value>> {
        let p = root.join(rel);
        if !p.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        serde_json::from_str(&text).map(Some).map_err(|e| ProvenanceError::CorruptLayout(format!("{rel}: {e}")))
    };
    let mut files = BTreeMap::new();
    for rel in list_files(&root.join("results"))? {
        if matches!(rel.extension().and_then(|e| e.to_str()), Some("csv" | "txt")) {
            let p = root.join("results").join(&rel);
            files.insert(format!("results/{}", rel.display()), fs::read_to_string(&p).map_err(|e| io_err(&p, e))?);
        }
    }
    let mut plots = Vec::new();
    for rel in list_files(&root.join("plots"))? {
        if rel.extension().and_then(|e| e.to_str()) == Some("json") {
            let p = root.join("plots").join(&rel);
            let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            plots.push(PlotSpec::from_json(&text).map_err(|e| ProvenanceError::CorruptLayout(format!("plots/{}: {e}", rel.display())))?);
        }
    }
    Ok(ResultsView {
        name: exp.name().to_string(),
        status: exp.status(),
        problem_type: exp.record().execution.problem_type,
        ml: read_json("results/ml/summary.json")?,
        fi: read_json("results/fi/summary.json")?,
        files,
        plots,
    })
}

use super::events::EventLog;
use super::layout::{list_files, valid_name, write_atomic, LEAF_DIRS, PIPELINE, RAW_DATA, RAW_DIGEST};
use super::lock::ExperimentLock;
use super::options::{from_json, to_json, FORMAT_VERSION};
use super::replay::{self, ReplayReport};
use super::stages::{self, Artifact, ResultsView, VisualiseOutput};
use super::{io_err, DataOptions, ExecutionOptions, FiOptions, MlOptions, PlottingOptions, PreprocessingOptions, ProvenanceError, Result};
use helixforge_core::learners::{PredictionTable, TrainedModel};
use helixforge_core::preprocess::TransformPipeline;
use helixforge_core::stats::PlotOptions;
use helixforge_core::tabular::{ingest_csv, IngestOptions, IngestPolicy, SplitPlan};
use helixforge_core::{Dataset, ProblemType};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Created,
    Preprocessed,
    Trained,
    Interpreted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Created => "created",
            Status::Preprocessed => "preprocessed",
            Status::Trained => "trained",
            Status::Interpreted => "interpreted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Create,
    Preprocess,
    Visualise,
    Train,
    Interpret,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Create => "create",
            Stage::Preprocess => "preprocess",
            Stage::Visualise => "visualise",
            Stage::Train => "train",
            Stage::Interpret => "interpret",
        }
    }

    /// Interpretation logs to logs/fi; every other stage to logs/ml.
    fn log_dir(&self) -> &'static str {
        match self {
            Stage::Interpret => "logs/fi",
            _ => "logs/ml",
        }
    }

    /// Directories whose contents this stage owns and regenerates.
    fn owned_dirs(&self) -> &'static [&'static str] {
        match self {
            Stage::Create => &[],
            Stage::Preprocess => &["models", "results/ml", "results/fi", "plots/data", "plots/ml", "plots/fi"],
            Stage::Visualise => &["plots/data"],
            Stage::Train => &["models", "results/ml", "results/fi", "plots/ml", "plots/fi"],
            Stage::Interpret => &["results/fi", "plots/fi"],
        }
    }

    /// Option files invalidated when this stage reruns.
    fn downstream_options(&self) -> &'static [&'static str] {
        match self {
            Stage::Preprocess => &["ml.json", "fi.json"],
            Stage::Train => &["fi.json"],
            _ => &[],
        }
    }
}

/// Everything recorded about an experiment, rebuilt from its option files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub status: Status,
    pub execution: ExecutionOptions,
    pub data: DataOptions,
    pub plotting: PlottingOptions,
    pub preprocessing: Option<PreprocessingOptions>,
    pub ml: Option<MlOptions>,
    pub fi: Option<FiOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CreateRequest {
    pub name: String,
    pub random_state: u64,
    /// Inferred from the target column when absent.
    pub problem_type: Option<ProblemType>,
    /// Last column when absent.
    pub dependent_variable: Option<String>,
    pub data_split: Option<SplitPlan>,
    pub ingest_policy: IngestPolicy,
    pub plotting: Option<PlotOptions>,
}

impl Default for CreateRequest {
    fn default() -> Self {
        Self {
            name: String::new(),
            random_state: 1221,
            problem_type: None,
            dependent_variable: None,
            data_split: None,
            ingest_policy: IngestPolicy::Reject,
            plotting: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn from_env() -> Self {
        Self::new(super::workspace_root())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Names of the directories that look like experiments, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        if !self.root.exists() {
            return Ok(Vec::new());
        }
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(|e| io_err(&self.root, e))? {
            let entry = entry.map_err(|e| io_err(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if valid_name(&name) && entry.path().join("options/execution.json").is_file() {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn open(&self, name: &str) -> Result<Experiment> {
        if !valid_name(name) {
            return Err(ProvenanceError::InvalidName(name.to_string()));
        }
        let root = self.root.join(name);
        if !root.is_dir() {
            return Err(ProvenanceError::NotFound(name.to_string()));
        }
        Experiment::load(&root)
    }

    pub fn create(&self, req: &CreateRequest, csv: &[u8]) -> Result<Experiment> {
        if !valid_name(&req.name) {
            return Err(ProvenanceError::InvalidName(req.name.clone()));
        }
        let root = self.root.join(&req.name);
        if root.exists() {
            return Err(ProvenanceError::NameCollision(req.name.clone()));
        }
        let opts = IngestOptions {
            name: req.name.clone(),
            target_name: req.dependent_variable.clone(),
            problem_hint: req.problem_type,
            policy: req.ingest_policy,
        };
        let (ds, report) = ingest_csv(csv, &opts).map_err(|e| ProvenanceError::Invalid(format!("data: {e}")))?;
        let plot = req.plotting.clone().unwrap_or_default();
        plot.validate().map_err(|e| ProvenanceError::Invalid(format!("plotting: {e}")))?;
        let mut split = req.data_split.clone().unwrap_or_else(|| SplitPlan::holdout(0.2, req.random_state));
        split.seed = req.random_state;
        split.validate().map_err(|e| ProvenanceError::Invalid(format!("data_split: {e}")))?;

        fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))?;
        // create_dir (not _all) so two racing creators cannot both succeed
        fs::create_dir(&root).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => ProvenanceError::NameCollision(req.name.clone()),
            _ => io_err(&root, e),
        })?;
        for d in LEAF_DIRS {
            fs::create_dir_all(root.join(d)).map_err(|e| io_err(&root, e))?;
        }
        let record = ExperimentRecord {
            name: req.name.clone(),
            status: Status::Created,
            execution: ExecutionOptions {
                format_version: FORMAT_VERSION,
                experiment_name: req.name.clone(),
                random_state: req.random_state,
                problem_type: report.problem_type,
                dependent_variable: ds.target_name().to_string(),
                created_at: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                extra: Default::default(),
            },
            data: DataOptions {
                format_version: FORMAT_VERSION,
                data_path: RAW_DATA.into(),
                data_split: split,
                ingest_policy: req.ingest_policy,
                extra: Default::default(),
            },
            plotting: PlottingOptions { plot, ..PlottingOptions::default() },
            preprocessing: None,
            ml: None,
            fi: None,
        };
        let mut exp = Experiment { root: root.clone(), record };
        let _lock = ExperimentLock::acquire(&root, &req.name)?;
        let mut log = exp.open_log(Stage::Create)?;
        write_atomic(&root.join(RAW_DATA), csv)?;
        write_atomic(&root.join(RAW_DIGEST), format!("{}  raw.csv\n", sha256_hex(csv)).as_bytes())?;
        exp.save_options()?;
        log.info(format!("created experiment {} with {} rows and {} features", req.name, ds.n_rows(), ds.n_features()))?;
        log.info(format!("problem type {:?} ({})", report.problem_type, report.reason))?;
        if !report.dropped_rows.is_empty() {
            log.warn(format!("dropped rows with missing cells at lines {:?}", report.dropped_rows))?;
        }
        log.info(format!("wrote {RAW_DATA}"))?;
        exp.record.status = exp.derive_status();
        Ok(exp)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Experiment {
    root: PathBuf,
    record: ExperimentRecord,
}

fn read_option<T: serde::de::DeserializeOwned>(root: &Path, file: &str, required: bool) -> Result<Option<T>> {
    let path = root.join("options").join(file);
    if !path.is_file() {
        return if required { Err(ProvenanceError::CorruptLayout(file.to_string())) } else { Ok(None) };
    }
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    from_json(file, &bytes).map(Some)
}

impl Experiment {
    /// Rebuilds the record from the option files alone and re-verifies the
    /// raw-data checksum when the data is present.
    pub fn load(root: &Path) -> Result<Self> {
        for d in LEAF_DIRS {
            if !root.join(d).is_dir() {
                return Err(ProvenanceError::CorruptLayout(format!("{d}/")));
            }
        }
        let execution: ExecutionOptions = read_option(root, "execution.json", true)?.expect("required");
        let data: DataOptions = read_option(root, "data.json", true)?.expect("required");
        let plotting: PlottingOptions = read_option(root, "plotting.json", true)?.expect("required");
        // missing data is reported by the stages that need it
        if let Ok(bytes) = fs::read(root.join(&data.data_path)) {
            let digest = fs::read_to_string(root.join(RAW_DIGEST)).map_err(|_| ProvenanceError::CorruptLayout(RAW_DIGEST.into()))?;
            if digest.split_whitespace().next() != Some(sha256_hex(&bytes).as_str()) {
                return Err(ProvenanceError::CorruptLayout(format!("{} does not match its recorded checksum", data.data_path)));
            }
        }
        let mut exp = Experiment {
            root: root.to_path_buf(),
            record: ExperimentRecord {
                name: execution.experiment_name.clone(),
                status: Status::Created,
                execution,
                data,
                plotting,
                preprocessing: read_option(root, "preprocessing.json", false)?,
                ml: read_option(root, "ml.json", false)?,
                fi: read_option(root, "fi.json", false)?,
            },
        };
        exp.record.status = exp.derive_status();
        Ok(exp)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn name(&self) -> &str {
        &self.record.name
    }

    pub fn record(&self) -> &ExperimentRecord {
        &self.record
    }

    pub fn status(&self) -> Status {
        self.record.status
    }

    pub fn seed(&self) -> u64 {
        self.record.execution.random_state
    }

    fn derive_status(&self) -> Status {
        let r = &self.record;
        if r.fi.is_some() {
            Status::Interpreted
        } else if r.ml.is_some() {
            Status::Trained
        } else if r.preprocessing.is_some() {
            Status::Preprocessed
        } else {
            Status::Created
        }
    }

    /// Rewrites every present option file from the in-memory record.
    pub fn save_options(&self) -> Result<()> {
        let o = self.root.join("options");
        let r = &self.record;
        write_atomic(&o.join("execution.json"), &to_json(&r.execution))?;
        write_atomic(&o.join("data.json"), &to_json(&r.data))?;
        write_atomic(&o.join("plotting.json"), &to_json(&r.plotting))?;
        if let Some(p) = &r.preprocessing {
            write_atomic(&o.join("preprocessing.json"), &to_json(p))?;
        }
        if let Some(m) = &r.ml {
            write_atomic(&o.join("ml.json"), &to_json(m))?;
        }
        if let Some(f) = &r.fi {
            write_atomic(&o.join("fi.json"), &to_json(f))?;
        }
        Ok(())
    }

    pub(crate) fn set_seed(&mut self, seed: u64) -> Result<()> {
        self.record.execution.random_state = seed;
        self.record.data.data_split.seed = seed;
        self.save_options()
    }

    fn open_log(&self, stage: Stage) -> Result<EventLog> {
        EventLog::open_run(&self.root.join(stage.log_dir()), stage.as_str())
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let path = self.root.join(&self.record.data.data_path);
        let bytes = fs::read(&path).map_err(|_| ProvenanceError::IllegalTransition {
            stage: "a data stage".into(),
            status: format!("missing {}", self.record.data.data_path),
        })?;
        let opts = IngestOptions {
            name: self.record.name.clone(),
            target_name: Some(self.record.execution.dependent_variable.clone()),
            problem_hint: Some(self.record.execution.problem_type),
            policy: self.record.data.ingest_policy,
        };
        ingest_csv(bytes.as_slice(), &opts).map(|(ds, _)| ds).map_err(|e| ProvenanceError::Invalid(format!("data: {e}")))
    }

    /// The fitted preprocessing pipeline, or the identity when preprocessing
    /// never ran.
    pub fn pipeline(&self, ds: &Dataset) -> Result<TransformPipeline> {
        let path = self.root.join(PIPELINE);
        if !path.is_file() {
            return Ok(TransformPipeline::identity(ds.feature_names()));
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        TransformPipeline::from_json(&text).map_err(|e| ProvenanceError::CorruptLayout(format!("{PIPELINE}: {e}")))
    }

    pub fn models(&self) -> Result<Vec<TrainedModel>> {
        let Some(ml) = &self.record.ml else {
            return Err(ProvenanceError::IllegalTransition { stage: "loading models".into(), status: self.status().to_string() });
        };
        let opts = ml.train_options()?;
        let mut out = Vec::new();
        for spec in opts.models.iter().filter(|m| m.use_model) {
            let rel = format!("models/{}.json", spec.family.as_str());
            let path = self.root.join(&rel);
            let text = fs::read_to_string(&path)
                .map_err(|_| ProvenanceError::Invalid(format!("{rel} is missing; train with save_models enabled")))?;
            out.push(serde_json::from_str(&text).map_err(|e| ProvenanceError::CorruptLayout(format!("{rel}: {e}")))?);
        }
        Ok(out)
    }

    /// Whether `stage` may run now; the same check every stage method makes
    /// before taking the lock.
    pub fn check(&self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Create => Err(ProvenanceError::IllegalTransition { stage: "create".into(), status: self.status().to_string() }),
            Stage::Interpret => self.require(stage, Status::Trained),
            Stage::Train if !self.root.join(&self.record.data.data_path).is_file() => {
                Err(ProvenanceError::IllegalTransition { stage: "train".into(), status: "missing data".into() })
            }
            _ => self.require(stage, Status::Created),
        }
    }

    fn require(&self, stage: Stage, min: Status) -> Result<()> {
        if self.status() < min {
            return Err(ProvenanceError::IllegalTransition { stage: stage.as_str().into(), status: self.status().to_string() });
        }
        Ok(())
    }

    /// Persists one stage run: clears what the stage owns, writes its
    /// outputs, then its options file (so status only advances once the
    /// outputs exist), logging every file written.
    pub fn record_stage(&mut self, stage: Stage, outputs: &[Artifact], log: &mut EventLog) -> Result<()> {
        for dir in stage.owned_dirs() {
            let base = self.root.join(dir);
            for rel in list_files(&base)? {
                if *dir == "models" && rel == Path::new("pipeline.json") && stage == Stage::Train {
                    continue;
                }
                let p = base.join(&rel);
                fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
            }
        }
        for f in stage.downstream_options() {
            let p = self.root.join("options").join(f);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
                log.info(format!("invalidated options/{f}"))?;
            }
        }
        match stage {
            Stage::Preprocess => {
                self.record.ml = None;
                self.record.fi = None;
            }
            Stage::Train => self.record.fi = None,
            _ => {}
        }
        for a in outputs {
            write_atomic(&self.root.join(&a.path), &a.bytes)?;
            log.info(format!("wrote {}", a.path))?;
        }
        self.save_options()?;
        self.record.status = self.derive_status();
        log.info(format!("recorded {} options; status {}", stage.as_str(), self.status()))
    }

    fn run_stage<F>(&mut self, stage: Stage, body: F) -> Result<()>
    where
        F: FnOnce(&mut Self, &mut EventLog) -> Result<Vec<Artifact>>,
    {
        let _lock = ExperimentLock::acquire(&self.root, &self.record.name)?;
        let mut log = self.open_log(stage)?;
        log.info(format!("{} started (seed {})", stage.as_str(), self.seed()))?;
        let saved = self.record.clone();
        match body(self, &mut log) {
            Ok(outputs) => self.record_stage(stage, &outputs, &mut log),
            Err(e) => {
                self.record = saved;
                log.error(e.to_string())?;
                Err(e)
            }
        }
    }

    pub fn preprocess(&mut self, opts: PreprocessingOptions) -> Result<()> {
        self.check(Stage::Preprocess)?;
        self.run_stage(Stage::Preprocess, |exp, log| {
            let ds = exp.dataset()?;
            let out = stages::preprocess(&ds, &opts, log)?;
            exp.record.preprocessing = Some(opts);
            Ok(out)
        })
    }

    pub fn visualise(&mut self, plotting: Option<PlottingOptions>) -> Result<VisualiseOutput> {
        self.check(Stage::Visualise)?;
        let mut result = None;
        self.run_stage(Stage::Visualise, |exp, log| {
            if let Some(p) = plotting {
                p.plot.validate().map_err(|e| ProvenanceError::Invalid(format!("plotting: {e}")))?;
                exp.record.plotting = p;
            }
            let ds = exp.dataset()?;
            let pipe = exp.record.preprocessing.is_some().then(|| exp.pipeline(&ds)).transpose()?;
            let (view, out) = stages::visualise(&ds, pipe.as_ref(), &exp.record.plotting.plot, exp.seed(), log)?;
            result = Some(view);
            Ok(out)
        })?;
        Ok(result.expect("set on success"))
    }

    pub fn train(&mut self, opts: MlOptions) -> Result<()> {
        self.check(Stage::Train)?;
        self.run_stage(Stage::Train, |exp, log| {
            let ds = exp.dataset()?;
            let pipe = exp.pipeline(&ds)?;
            let mut plan = exp.record.data.data_split.clone();
            plan.seed = exp.seed();
            let out = stages::train(&ds, &pipe, &plan, &opts, &exp.record.plotting.plot, !exp.root.join(PIPELINE).exists(), log)?;
            exp.record.ml = Some(opts);
            Ok(out)
        })
    }

    pub fn interpret(&mut self, opts: FiOptions) -> Result<()> {
        self.check(Stage::Interpret)?;
        self.run_stage(Stage::Interpret, |exp, log| {
            let ds = exp.dataset()?;
            let pipe = exp.pipeline(&ds)?;
            let models = exp.models()?;
            let out = stages::interpret(&ds, &pipe, &models, &opts, &exp.record.plotting.plot, exp.seed(), log)?;
            exp.record.fi = Some(opts);
            Ok(out)
        })
    }

    /// Predictions for new rows with the selected models (all when empty).
    /// Reads only; nothing is recorded.
    pub fn predict(&self, csv: &[u8], model_names: &[String]) -> Result<PredictionTable> {
        self.require(Stage::Train, Status::Trained)?;
        let ds = self.dataset()?;
        let pipe = self.pipeline(&ds)?;
        let mut models = self.models()?;
        if !model_names.is_empty() {
            for n in model_names {
                if !models.iter().any(|m| &m.name == n || m.family.as_str() == n) {
                    return Err(ProvenanceError::Invalid(format!("models: unknown model `{n}`")));
                }
            }
            models.retain(|m| model_names.iter().any(|n| n == &m.name));
        }
        stages::predict(&models, &pipe, csv)
    }

    /// The stored visualisation, or None when the stage has not run since
    /// the last preprocessing.
    pub fn stored_visualisation(&self) -> Result<Option<VisualiseOutput>> {
        stages::stored_visualisation(self)
    }

    pub fn results(&self) -> Result<ResultsView> {
        stages::results_view(self)
    }

    /// Re-executes every recorded stage in a shadow copy and diffs the
    /// numeric artifacts. `seed` overrides the recorded seed.
    pub fn replay(&self, seed: Option<u64>) -> Result<ReplayReport> {
        self.require(Stage::Train, Status::Trained)?;
        replay::replay(self, seed)
    }
}

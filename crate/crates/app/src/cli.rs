//! Headless counterpart of the web pages: every stage as a subcommand.

use crate::api::{error_kind, serve};
use clap::{Parser, Subcommand};
use helixforge_core::ProblemType;
use helixforge_provenance::{
    CreateRequest, Experiment, ExperimentRecord, FiOptions, MlOptions, PlottingOptions, PreprocessingOptions, ProvenanceError,
    ResultsView, Workspace,
};
use serde::de::DeserializeOwned;
use serde_json::Value;
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "helixforge", version, about = "Provenance-aware interpretable machine learning workbench")]
pub struct Cli {
    /// Directory holding experiments [default: ~/HelixForgeExperiments]
    #[arg(long, global = true, env = "HELIXFORGE_HOME")]
    workspace: Option<PathBuf>,
    #[arg(long, global = true)]
    experiment: Option<String>,
    /// JSON file with the options for the stage being run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for `new`; seed override for `replay`
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create an experiment from a CSV file
    New {
        #[arg(long)]
        data: PathBuf,
        /// regression or classification; inferred from the target when absent
        #[arg(long)]
        problem: Option<String>,
        /// Target column; the last column when absent
        #[arg(long)]
        target: Option<String>,
    },
    Preprocess,
    Visualise,
    Train,
    Interpret,
    /// Predict new rows with the trained models
    Predict {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated model names; all trained models when absent
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Write the table here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the recorded options and results
    Inspect,
    /// Re-run every recorded stage and compare against the stored artifacts
    Replay,
    /// List experiments in the workspace
    List,
    /// Serve the HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: SocketAddr,
    },
}

/// User errors exit 1, internal failures 2.
enum Failure {
    User(String),
    Internal(String),
}

impl From<ProvenanceError> for Failure {
    fn from(e: ProvenanceError) -> Self {
        let msg = format!("{}: {e}", error_kind(&e));
        match e {
            ProvenanceError::CorruptLayout(_) | ProvenanceError::VersionMismatch { .. } | ProvenanceError::Io { .. } => {
                Failure::Internal(msg)
            }
            _ => Failure::User(msg),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::User(format!("cannot read {}: {e}", path.display())))
}

fn config<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<Option<T>> {
    let Some(p) = path else { return Ok(None) };
    let bytes = read_file(p)?;
    serde_json::from_slice(&bytes).map(Some).map_err(|e| Failure::User(format!("{}: {e}", p.display())))
}

impl Cli {
    fn workspace(&self) -> Workspace {
        self.workspace.clone().map(Workspace::new).unwrap_or_else(Workspace::from_env)
    }

    fn name(&self) -> CliResult<&str> {
        self.experiment.as_deref().ok_or_else(|| Failure::User("--experiment is required".into()))
    }

    fn open(&self) -> CliResult<Experiment> {
        Ok(self.workspace().open(self.name()?)?)
    }

    fn no_seed(&self, what: &str) -> CliResult {
        match self.seed {
            Some(_) => Err(Failure::User(format!("--seed does not apply to {what}; the recorded seed is used"))),
            None => Ok(()),
        }
    }

    fn run(&self, out: &mut dyn Write) -> CliResult {
        let cfg = self.config.as_deref();
        match &self.command {
            Command::New { data, problem, target } => {
                let mut req: CreateRequest = config(cfg)?.unwrap_or_default();
                req.name = self.name()?.to_string();
                if let Some(s) = self.seed {
                    req.random_state = s;
                }
                if let Some(p) = problem {
                    let p: ProblemType = serde_json::from_value(Value::String(p.to_lowercase()))
                        .map_err(|_| Failure::User(format!("--problem must be regression or classification, got `{p}`")))?;
                    req.problem_type = Some(p);
                }
                if target.is_some() {
                    req.dependent_variable = target.clone();
                }
                let exp = self.workspace().create(&req, &read_file(data)?)?;
                let r = exp.record();
                say(out, format!("created {} at {}", r.name, exp.root().display()))?;
                say(out, format!("problem type {:?}, target {}, seed {}", r.execution.problem_type, r.execution.dependent_variable, r.execution.random_state))
            }
            Command::Preprocess => {
                self.no_seed("preprocess")?;
                let mut exp = self.open()?;
                let opts = match config::<PreprocessingOptions>(cfg)? {
                    Some(o) => o,
                    None => exp.record().preprocessing.clone().unwrap_or_default(),
                };
                exp.preprocess(opts)?;
                let pipe = exp.pipeline(&exp.dataset()?)?;
                say(out, format!("preprocessed; surviving features: {}", pipe.surviving_features.join(", ")))
            }
            Command::Visualise => {
                self.no_seed("visualise")?;
                let mut exp = self.open()?;
                let view = exp.visualise(config::<PlottingOptions>(cfg)?)?;
                say(out, format!("wrote {} plots to {}", view.plots.len(), exp.root().join("plots/data").display()))
            }
            Command::Train => {
                self.no_seed("train")?;
                let mut exp = self.open()?;
                let opts = match config::<MlOptions>(cfg)? {
                    Some(o) => o,
                    None => exp.record().ml.clone().ok_or_else(|| Failure::User("train needs --config with model_types".into()))?,
                };
                exp.train(opts)?;
                write_metrics(out, &exp.results()?)
            }
            Command::Interpret => {
                self.no_seed("interpret")?;
                let mut exp = self.open()?;
                let opts = match config::<FiOptions>(cfg)? {
                    Some(o) => o,
                    None => exp.record().fi.clone().unwrap_or_default(),
                };
                exp.interpret(opts)?;
                let view = exp.results()?;
                if let Some(rules) = view.files.get("results/fi/fuzzy_rules.txt") {
                    out.write_all(rules.as_bytes()).map_err(|e| Failure::Internal(e.to_string()))?;
                }
                say(out, format!("importances written to {}", exp.root().join("results/fi").display()))
            }
            Command::Predict { data, models, output } => {
                self.no_seed("predict")?;
                let table = self.open()?.predict(&read_file(data)?, models)?;
                let csv = table.to_csv_string();
                match output {
                    Some(p) => std::fs::write(p, csv).map_err(|e| Failure::User(format!("cannot write {}: {e}", p.display()))),
                    None => out.write_all(csv.as_bytes()).map_err(|e| Failure::Internal(e.to_string())),
                }
            }
            Command::Inspect => {
                let exp = self.open()?;
                out.write_all(inspect(exp.record(), &exp.results()?).as_bytes()).map_err(|e| Failure::Internal(e.to_string()))
            }
            Command::Replay => {
                let exp = self.open()?;
                let report = exp.replay(self.seed)?;
                if report.is_clean() {
                    return say(out, format!("no divergence ({} artifacts compared)", report.compared));
                }
                for d in &report.differences {
                    say(out, format!("{}: {}", d.path, d.detail))?;
                }
                Err(report.into_result().err().map(Failure::from).expect("differences present"))
            }
            Command::List => {
                for name in self.workspace().list()? {
                    say(out, name)?;
                }
                Ok(())
            }
            Command::Serve { addr } => {
                let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
                rt.block_on(serve(self.workspace(), *addr)).map_err(|e| Failure::Internal(format!("serve on {addr}: {e}")))
            }
        }
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> CliResult {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Failure::Internal(e.to_string()))
}

fn write_metrics(out: &mut dyn Write, view: &ResultsView) -> CliResult {
    let Some(Value::Object(models)) = &view.ml else { return Ok(()) };
    for (name, m) in models {
        let metrics: Vec<String> = m["test_metrics"]
            .as_object()
            .map(|t| t.iter().map(|(k, v)| format!("{k} {:.4}", v["mean"].as_f64().unwrap_or(f64::NAN))).collect())
            .unwrap_or_default();
        say(out, format!("{name}: test {}", metrics.join(", ")))?;
    }
    Ok(())
}

fn flatten(prefix: &str, v: &Value, lines: &mut Vec<String>) {
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, lines);
            }
        }
        other => lines.push(format!("  {prefix}: {other}")),
    }
}

/// Every option file as `key: value` lines, then the headline results.
pub fn inspect(record: &ExperimentRecord, view: &ResultsView) -> String {
    let mut lines = vec![format!("Experiment {} ({})", record.name, record.status)];
    let sections: [(&str, Option<Value>); 6] = [
        ("execution.json", serde_json::to_value(&record.execution).ok()),
        ("data.json", serde_json::to_value(&record.data).ok()),
        ("plotting.json", serde_json::to_value(&record.plotting).ok()),
        ("preprocessing.json", record.preprocessing.as_ref().and_then(|p| serde_json::to_value(p).ok())),
        ("ml.json", record.ml.as_ref().and_then(|p| serde_json::to_value(p).ok())),
        ("fi.json", record.fi.as_ref().and_then(|p| serde_json::to_value(p).ok())),
    ];
    for (file, value) in sections {
        if let Some(v) = value {
            lines.push(String::new());
            lines.push(format!("[{file}]"));
            flatten("", &v, &mut lines);
        }
    }
    if let Some(Value::Object(models)) = &view.ml {
        lines.push(String::new());
        lines.push("[results]".into());
        for (name, m) in models {
            for set in ["train_metrics", "test_metrics"] {
                if let Some(t) = m[set].as_object() {
                    for (k, s) in t {
                        lines.push(format!(
                            "  {name} {} {k}: {:.4} ± {:.4}",
                            set.trim_end_matches("_metrics"),
                            s["mean"].as_f64().unwrap_or(f64::NAN),
                            s["sd"].as_f64().unwrap_or(f64::NAN)
                        ));
                    }
                }
            }
        }
    }
    if let Some(rules) = view.files.get("results/fi/fuzzy_rules.txt") {
        lines.push(String::new());
        lines.push("[fuzzy rules]".into());
        lines.extend(rules.lines().map(|l| format!("  {l}")));
    }
    lines.push(String::new());
    lines.join("\n")
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match cli.run(out) {
        Ok(()) => 0,
        Err(Failure::User(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Internal(m)) => {
            let _ = writeln!(err, "internal error: {m}");
            2
        }
    }
}

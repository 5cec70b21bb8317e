//! The experiment store: one directory per experiment holding raw data,
//! option records for every stage, append-only logs, models, results and
//! plots, plus the stage runners that produce them and deterministic replay.

mod events;
mod layout;
mod lock;
mod options;
mod replay;
mod stages;
mod store;

pub use events::{EventLog, Level};
pub use layout::{workspace_root, LEAF_DIRS, RAW_DATA, RAW_DIGEST};
pub use lock::{is_locked, ExperimentLock, STALE_AFTER};
pub use options::{
    parse_request, DataOptions, ExecutionOptions, FiOptions, MlOptions, ModelEntry, PlottingOptions, PreprocessingOptions,
    FORMAT_VERSION,
};
pub use replay::{diff_trees, Difference, ReplayReport};
pub use stages::{Artifact, ResultsView, VisualiseOutput};
pub use store::{CreateRequest, Experiment, ExperimentRecord, Stage, Status, Workspace};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProvenanceError {
    #[error("invalid experiment name `{0}`: use letters, digits, `_` or `-`")]
    InvalidName(String),
    #[error("an experiment named `{0}` already exists")]
    NameCollision(String),
    #[error("no experiment named `{0}`")]
    NotFound(String),
    #[error("corrupt experiment layout: {0}")]
    CorruptLayout(String),
    #[error("layout format_version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("cannot run {stage} while the experiment is {status}")]
    IllegalTransition { stage: String, status: String },
    #[error("experiment `{0}` is locked by another writer")]
    Locked(String),
    /// A user-correctable problem with data, options or a request.
    #[error("{0}")]
    Invalid(String),
    #[error("replay diverged in {} artifact(s): {}", .0.len(), .0.join(", "))]
    ReplayDivergence(Vec<String>),
    #[error("I/O failure on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = ProvenanceError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> ProvenanceError {
    ProvenanceError::Io { path: path.display().to_string(), message: e.to_string() }
}

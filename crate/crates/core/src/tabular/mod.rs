//! Dataset representation, CSV ingestion and train/test splitting.

mod dataset;
mod ingest;
mod split;

pub use dataset::{format_f64, Column, ColumnValues, Dataset, ProblemType};
pub use ingest::{ingest_csv, IngestOptions, IngestPolicy, IngestReport};
pub use split::{make_splits, split_indices, Split, SplitMethod, SplitPlan};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TabularError {
    #[error("the CSV file is empty")]
    EmptyFile,
    #[error("duplicate header name `{0}`")]
    DuplicateHeader(String),
    #[error("empty header name in column {0}")]
    EmptyHeader(usize),
    #[error("row at line {0} has a different number of fields than the header")]
    RaggedRow(usize),
    #[error("non-numeric cell in numeric column `{col}` at line {line}")]
    NonNumericCell { col: String, line: usize },
    #[error("at least {min} data rows are required, found {found}")]
    TooFewRows { min: usize, found: usize },
    #[error("at least 2 columns are required, found {0}")]
    TooFewColumns(usize),
    #[error("missing cells in rows at lines {0:?}")]
    MissingCells(Vec<usize>),
    #[error("unknown target column `{0}`")]
    UnknownTarget(String),
    #[error("invalid problem type: {0}")]
    InvalidProblemType(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("invalid split plan: {0}")]
    InvalidPlan(String),
    #[error("a fold or out-of-bag set would be empty")]
    EmptyFold,
    #[error("class `{class}` has {count} members, fewer than the {needed} required for stratification")]
    StratificationImpossible { class: String, count: usize, needed: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

pub type Result<T, E = TabularError> = std::result::Result<T, E>;

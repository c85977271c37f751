//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, solvers, data handling and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("{what} exceeds the resource guard ({requested} > {limit}); {hint}")]
    ResourceGuard {
        what: &'static str,
        limit: usize,
        requested: usize,
        hint: &'static str,
    },

    #[error("invalid model state: {0}")]
    InvalidState(String),

    #[error("csv error in {path}: {kind}")]
    Csv { path: String, kind: CsvErrorKind },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Distinguishes the CSV failure modes callers need to report separately.
#[derive(Debug, Error)]
pub enum CsvErrorKind {
    #[error("file is empty")]
    Empty,
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric cell at row {row}, column {col}: {value:?}")]
    NonNumericCell { row: usize, col: usize, value: String },
    #[error("label at row {row} is not a non-negative integer: {value:?}")]
    BadLabel { row: usize, value: String },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

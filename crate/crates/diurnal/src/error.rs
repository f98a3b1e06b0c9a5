//! Error type shared by every stage of the pipeline.

use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by ingestion, modeling, detection and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: String, found: String },

    #[error("all {rows} data rows were rejected")]
    AllRowsRejected { rows: usize },

    #[error("duplicate ground-truth record for {0}")]
    DuplicateGroundTruthDay(NaiveDate),

    #[error("sensor {sensor} day {day}: readings are constant and cannot be normalized")]
    DegenerateDay { sensor: String, day: NaiveDate },

    #[error("insufficient data: need {need}, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file rejected: {0}")]
    BadModel(String),

    #[error("data coverage: {0}")]
    DataCoverage(String),

    #[error("no threshold reaches precision >= {min_precision}")]
    CalibrationFailed { min_precision: f64 },
}

impl Error {
    /// Process exit code class: 1 for usage/config errors, 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

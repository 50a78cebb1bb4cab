use chrono::NaiveDateTime;
use thiserror::Error;

use crate::series::Resolution;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate timestamp {timestamp}")]
    Duplicate {
        line: usize,
        timestamp: NaiveDateTime,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("missing value at series boundary ({0})")]
    Boundary(NaiveDateTime),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("missing-value run of {hours} h starting at {start} exceeds the {limit} h interpolation limit")]
    GapTooLong {
        start: NaiveDateTime,
        hours: i64,
        limit: i64,
    },

    #[error("resolution error: expected {expected:?} series, got {found:?}")]
    Resolution {
        expected: Resolution,
        found: Resolution,
    },

    #[error("insufficient data: need more than {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("calendar error: {0}")]
    Calendar(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("no emission factor registered for {0}")]
    NoFactor(String),

    #[error("division by zero: {0}")]
    Division(String),

    #[error("unsupported model format_version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for malformed input documents and I/O failures, as opposed to
    /// well-formed data that violates a domain rule.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::FormatVersion { .. }
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

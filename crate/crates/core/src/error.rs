use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("index out of bounds at line {line}: {msg}")]
    Bounds { line: usize, msg: String },

    #[error("invalid value at line {line}: {msg}")]
    Value { line: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inconsistent state: {0}")]
    State(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("state space too large: {states} configurations exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: f64, limit: usize },

    #[error("invalid configuration field `{field}`: {msg}")]
    Config { field: &'static str, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("task for document {doc} failed: {msg}")]
    TaskFailed { doc: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 usage, 3 I/O and input format, 4 numeric or
    /// state errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Parse { .. }
            | Error::Bounds { .. }
            | Error::Value { .. }
            | Error::Format(_)
            | Error::Io { .. }
            | Error::RawIo(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::Domain(_)
            | Error::State(_)
            | Error::InsufficientData { .. }
            | Error::StateSpaceTooLarge { .. }
            | Error::TaskFailed { .. } => 4,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

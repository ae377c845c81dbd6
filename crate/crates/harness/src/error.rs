use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: expected {expected} features, found {got}")]
    InconsistentDimension {
        line: u64,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Core(#[from] robust_knn::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Config(String),
}

impl HarnessError {
    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            line,
            message: message.into(),
        }
    }
}

impl HarnessError {
    /// Whether the failure comes from the input data rather than the invocation.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, HarnessError::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

use thiserror::Error;

/// Errors raised by the classification and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("k = {k} exceeds the {n} available neighbors")]
    KTooLarge { k: usize, n: usize },
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("non-finite coordinate at example {index}")]
    NonFinite { index: usize },
    #[error("invalid label value {0}, expected 0 or 1")]
    InvalidLabel(i64),
    #[error(
        "invalid noise rates ({tau_plus}, {tau_minus}): each must lie in [0, 1) with a sum below 1"
    )]
    InvalidRates { tau_plus: f64, tau_minus: f64 },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

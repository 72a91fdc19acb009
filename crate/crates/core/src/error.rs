use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators, the oracle and the study drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied input that violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Feature vector and model disagree on dimension.
    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A rank statistic was requested on tied scores.
    #[error("{statistic} requires distinct scores, found ties")]
    TiedScores { statistic: &'static str },

    /// A pair statistic needs both labels in the sample.
    #[error("{statistic} requires both classes (n+ = {positives}, n- = {negatives})")]
    SingleClass {
        statistic: &'static str,
        positives: usize,
        negatives: usize,
    },

    /// Quadrature or root finding did not reach the requested accuracy.
    #[error("numerical failure in {context}: achieved {achieved:e}, required {required:e}")]
    Numerical {
        context: String,
        achieved: f64,
        required: f64,
    },

    /// Two independent computation routes disagree beyond tolerance.
    #[error("consistency failure in {context}: routes differ by {difference:e} (tolerance {tolerance:e})")]
    Consistency {
        context: String,
        difference: f64,
        tolerance: f64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

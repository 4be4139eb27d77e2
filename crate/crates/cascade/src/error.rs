//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument is outside its mathematical domain.
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    /// A state or weight vector has the wrong length for the operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Time integration aborted (step exhaustion, non-finite state, ...).
    /// `t` is the time reached when the failure was detected.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// An ensemble member failed to integrate; carries the sample index.
    #[error("sample {index} failed: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Configuration file or flag rejected.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParamDomain(msg.into())
    }

    pub(crate) fn dims(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }
}

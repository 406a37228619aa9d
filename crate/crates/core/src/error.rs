//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Value outside the representable or invertible range.
    #[error("out of range: {0}")]
    Range(String),

    /// Scenario or type configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Channels with zero span cannot be normalized (1-based ids).
    #[error("degenerate constant channels: {0:?}")]
    DegenerateChannels(Vec<usize>),

    /// Requested computation exceeds the resource budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Solver state that the model treats as unreachable.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate a bad run configuration rather than a
    /// runtime failure. The CLI maps these to exit code 1.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Argument(_) | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

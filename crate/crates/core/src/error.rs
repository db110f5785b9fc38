use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Location-tagged problem found while reading a configuration or forcing file.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}:{line}: {message}", path.display())]
pub struct ConfigError {
    pub path: PathBuf,
    /// 1-based line (or CSV row) number; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Self { path: path.into(), line, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Recoverable: the caller is expected to retry with a smaller time step.
    #[error("{solver} solver did not converge after {iterations} iterations")]
    NotConverged { solver: &'static str, iterations: usize },

    #[error("{solver} solver produced a non-finite value in cell {cell}")]
    NonFinite { solver: &'static str, cell: usize },

    #[error("time step underflow at t = {time} s (dt = {dt} s below dt_min)\n{dump}")]
    DtUnderflow { time: f64, dt: f64, dump: String },

    #[error("forcing gap at t = {time} s")]
    ForcingGap { time: f64 },

    #[error("scenario '{name}': {source}")]
    Scenario {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that a smaller time step may cure.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }

    pub(crate) fn in_scenario(self, name: &str) -> Error {
        Error::Scenario { name: name.to_string(), source: Box::new(self) }
    }
}

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A rejected configuration, located by dotted field path and source line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("plot needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("log-scale plot has a non-positive or non-finite value: {0}")]
    NotLogScalable(f64),
    #[error("plot has no finite data")]
    NoFiniteData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// A core routine rejected its arguments at run time.
    #[error("invalid run parameter: {0}")]
    Argument(nodal_core::Error),
    #[error("numerical degeneracy: {0}")]
    Degenerate(nodal_core::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Io { .. } => 1,
            RunError::Config(_) | RunError::Argument(_) => 2,
            RunError::Degenerate(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }
}

impl From<nodal_core::Error> for RunError {
    fn from(e: nodal_core::Error) -> Self {
        match e {
            nodal_core::Error::InvalidArgument(_) => RunError::Argument(e),
            _ => RunError::Degenerate(e),
        }
    }
}

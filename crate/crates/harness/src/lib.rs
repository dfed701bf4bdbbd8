//! Experiment runner, file formats and checks around `olvc-core`.

pub mod config;
pub mod experiment;
pub mod report;
pub mod tracefile;
pub mod verify;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}:{line}:{column}: {message}")]
    Config { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    TraceFormat { path: PathBuf, line: usize, message: String },
    #[error("oracle failed: {0}")]
    Oracle(olvc_core::Error),
    #[error("environment ran out after {steps} of {horizon} steps")]
    Exhausted { steps: usize, horizon: usize },
    #[error(transparent)]
    Core(olvc_core::Error),
}

impl From<olvc_core::Error> for HarnessError {
    fn from(e: olvc_core::Error) -> Self {
        match e {
            olvc_core::Error::EnvironmentExhausted { steps, horizon } => HarnessError::Exhausted { steps, horizon },
            other => HarnessError::Core(other),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

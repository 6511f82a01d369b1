//! Driver for building quarklet systems, running invariant suites and norm experiments.

pub mod commands;
pub mod config;
pub mod output;

use quarklet_core::error::QuarkletError;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    /// Parameter constraint violated; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Invariant or runtime failure; exit code 1.
    #[error("{0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<QuarkletError> for CliError {
    fn from(e: QuarkletError) -> Self {
        match e {
            QuarkletError::InvalidOrder(_)
            | QuarkletError::InvalidParams(_)
            | QuarkletError::Level { .. }
            | QuarkletError::Index { .. }
            | QuarkletError::WrongConstructor { .. }
            | QuarkletError::Hypothesis(_)
            | QuarkletError::UnknownFunction(_) => CliError::Config(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

//! Experiment orchestration for the `polarlab` binary: strict TOML config
//! parsing, dispatch to the core modules, and deterministic CSV/JSON
//! emission for external plotting.

pub mod config;
pub mod output;
pub mod run;

use thiserror::Error;

/// Process exit codes: 0 success, 2 config error, 3 numerical instability,
/// 4 I/O error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical instability: {0}")]
    Numerics(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error(transparent)]
    Input(#[from] qmem_core::io::IoError),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Compute(String),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    /// 1 for computation or fit failures, 2 for usage, input and IO problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

/// Module errors are computation failures.
pub fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

/// A config value rejected by a model constructor.
pub fn invalid<E: std::fmt::Display>(pointer: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config {
        pointer: pointer.to_string(),
        message: e.to_string(),
    }
}

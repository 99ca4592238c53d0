//! Operator surface for the engine: run single tasks, bench suites, sweep
//! ablations and hyperparameters, scan network profiles, and rebuild reports
//! from trace directories.

pub mod commands;
pub mod config;
pub mod engine;

use std::fmt;

/// Stable exit-code contract: 0 success, 1 task/backend failure,
/// 2 configuration error.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        CliError::Failure(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

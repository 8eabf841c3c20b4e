//! Experiment runner for `trsvr`: TOML configs, metrics CSVs, theory
//! verification reports and plot-ready comparison series.
//!
//! Exit codes are a stable contract: 0 success, 1 validation or I/O error,
//! 2 numeric failure, 3 verification failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod metrics;

use std::fmt;

pub use config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Io(String),
    Numeric(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<trsvr::Error> for CliError {
    fn from(e: trsvr::Error) -> Self {
        match e {
            trsvr::Error::NumericFailure { .. } => CliError::Numeric(e.to_string()),
            trsvr::Error::LemmaViolation { .. } => CliError::Verification(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

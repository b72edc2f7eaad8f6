//! Experiment runner for the `mvlab` crate: named scenarios, JSON job
//! configs, CSV/manifest artifact plumbing, and an exit-code contract that
//! separates "the run is invalid" from "the run worked but the expected
//! contrast failed".
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure during
//! a well-posed run, 4 scenario contrast failure, 1 anything else (I/O, …).

use std::fmt;

pub mod artifacts;
pub mod commands;
pub mod configs;
pub mod scenarios;

/// CLI-level error, carrying the exit-code family.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration (exit 2).
    Config(String),
    /// Numerical failure in a well-posed run: blowup, escapes, unusable
    /// diagnostics (exit 3).
    Numerical(String),
    /// The scenario ran to completion but its acceptance contrast failed
    /// (exit 4).
    Contrast(String),
    /// Everything else, chiefly I/O (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Contrast(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Contrast(m) => write!(f, "contrast failure: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mvlab::Error> for CliError {
    fn from(e: mvlab::Error) -> Self {
        if e.is_usage() {
            CliError::Config(e.to_string())
        } else {
            match e {
                mvlab::Error::Io(_) | mvlab::Error::Json(_) => CliError::Other(e.to_string()),
                other => CliError::Numerical(other.to_string()),
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

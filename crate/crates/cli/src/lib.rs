//! Configuration-driven front end for estimating and tuning probabilistic
//! behavioral distances. The `probtune` binary is a thin wrapper around
//! [`commands`].

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_MISSING: i32 = 4;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(code: i32, error: anyhow::Error) -> Self {
        Self { code, error }
    }

    pub fn config(error: anyhow::Error) -> Self {
        Self::new(EXIT_CONFIG, error)
    }

    pub fn integration(error: anyhow::Error) -> Self {
        Self::new(EXIT_INTEGRATION, error)
    }

    pub fn missing(error: anyhow::Error) -> Self {
        Self::new(EXIT_MISSING, error)
    }

    pub fn other(error: anyhow::Error) -> Self {
        Self::new(EXIT_OTHER, error)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

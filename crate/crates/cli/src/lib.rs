//! Library half of the `psmlab` command-line tool.
//!
//! The binary in `main.rs` is a thin argument-parsing shell over these
//! modules so the configuration loader and the four commands stay testable.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Command outcomes mapped onto process exit codes: usage and configuration
/// problems exit 1, model breakdown exits 2, validation failure exits 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Breakdown(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Breakdown(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            // ModelError messages already name the breakdown.
            CliError::Breakdown(msg) => write!(f, "{msg}"),
            CliError::Validation(msg) => write!(f, "validation failed: {msg}"),
        }
    }
}

impl From<psmlab_core::ModelError> for CliError {
    fn from(e: psmlab_core::ModelError) -> Self {
        use psmlab_core::ModelError::*;
        match e {
            Breakdown { .. } | Diverged { .. } | NoConvergence { .. } | PspollRateUndefined => {
                CliError::Breakdown(e.to_string())
            }
            InvalidParameter(_) | StageOutOfRange { .. } => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io: {e}"))
    }
}

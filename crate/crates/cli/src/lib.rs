//! Batch front end: scenario configs in, CSV/JSON artifacts and exit codes out.
//!
//! Exit codes: 0 success, 1 malformed config or runtime error, 2 parameter
//! validation failure, 3 at least one check failed.

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Validation(String),
    Core(blowup_core::Error),
    Io(std::io::Error),
    MissingArtifact(String),
    ChecksFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::ChecksFailed(_) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "malformed config: {m}"),
            CliError::Validation(m) => write!(f, "invalid parameters: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::MissingArtifact(m) => write!(f, "missing artifact {m}; run `blowup run` first"),
            CliError::ChecksFailed(names) => write!(f, "failing checks: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<blowup_core::Error> for CliError {
    fn from(e: blowup_core::Error) -> Self {
        match e {
            blowup_core::Error::InvalidParams(m) => CliError::Validation(m),
            e => CliError::Core(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

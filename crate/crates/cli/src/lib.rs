//! Experiment orchestration behind the `fairfed` binary: spec-file parsing,
//! training runs with JSON/CSV emission, and the built-in invariant suites.

pub mod check;
pub mod commands;
pub mod report;
pub mod spec;

use std::process::ExitCode;

/// Environment variable that replaces the `seed` of an experiment spec.
pub const SEED_ENV: &str = "FAIRFED_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad spec contents, infeasible setups. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// I/O trouble or a failed check. Exit code 1.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Failure(_) => ExitCode::from(1),
        }
    }
}

impl From<fairfed::Error> for CliError {
    fn from(e: fairfed::Error) -> Self {
        match e {
            fairfed::Error::Io(_) => CliError::Failure(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failure(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reads [`SEED_ENV`]; a set but unparsable value is a usage error.
pub fn seed_override() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Usage(format!("{SEED_ENV}: {e}"))),
    }
}

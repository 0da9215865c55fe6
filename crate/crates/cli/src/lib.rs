//! IO, file formats, configuration and the command line for the analysis
//! pipeline: epoch containers (CSV directory and binary), model dumps,
//! result serialization with a run manifest, and the subcommands wired in
//! [`commands`].

// validation guards are written as `!(x > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod epochs;
pub mod model_io;
pub mod results;

use std::process::ExitCode;

/// CLI failure classes, mapped onto exit codes: usage and IO problems exit
/// with 1, numeric pipeline failures with 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Numeric(#[from] tvoir_core::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(msg: impl std::fmt::Display) -> Self {
        Self::Io(msg.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Io(_) => ExitCode::from(1),
            CliError::Numeric(_) => ExitCode::from(2),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Floats are printed with 17 significant digits, enough to round-trip f64.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

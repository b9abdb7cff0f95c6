//! Configuration and artifact emission for the `gdsde` binary.

pub mod config;
pub mod emit;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Library(gdsde::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Library(_) => exit::FAIL,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

impl From<gdsde::Error> for CliError {
    fn from(e: gdsde::Error) -> Self {
        use gdsde::Error as E;
        match e {
            E::Configuration(m) | E::ParameterDomain(m) => CliError::Usage(m),
            E::Io(m) => CliError::Io { path: String::new(), message: m },
            other => CliError::Library(other),
        }
    }
}

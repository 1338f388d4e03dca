//! Experiment harness for the `dimerlab` command: configuration, verification suites, run
//! manifests, CSV tables and SVG renders.

pub mod config;
pub mod csv;
pub mod manifest;
pub mod run;
pub mod suite;
pub mod svg;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::CheckFailed(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

//! Experiment driver for the landmark diffusion library: seeded experiment
//! runners, TOML configuration, CSV/JSON outputs, and run manifests.
//!
//! The binary (`lad`) is a thin argument layer over [`experiments`]; every
//! runner is callable in-process so integration tests can assert on results
//! without shelling out.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod table;

use std::fmt;

/// Driver errors carry the process exit code demanded by the interface
/// contract: 2 for configuration problems, 3 for numerical failures, 1 for
/// environment/IO trouble.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lad::Error> for CliError {
    fn from(e: lad::Error) -> Self {
        match e {
            lad::Error::Solver(_) | lad::Error::Resolution(_) => CliError::Numerical(e.to_string()),
            lad::Error::UndefinedRatio { .. } => CliError::Numerical(e.to_string()),
            lad::Error::Io(_) | lad::Error::Csv(_) | lad::Error::Json(_) => {
                CliError::Io(e.to_string())
            }
            lad::Error::InvalidArgument(_) | lad::Error::DimensionMismatch(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

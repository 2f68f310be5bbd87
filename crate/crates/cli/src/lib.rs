//! Command-line front end for the `tvdbar` binary.

use std::fmt;

use tvdbar_core::Error;

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

pub use args::{Cli, Command};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use manifest::{RunManifest, Recorder};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments or input files. Exit code 2.
    Config(String),
    /// A numerical stage failed. Exit code 3.
    Numerical { stage: String, message: String },
    /// Anything else, mostly failed writes. Exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Classifies a core error raised while running `stage`.
    pub fn from_core(e: Error, stage: &str) -> Self {
        if e.is_config_error() {
            return CliError::Config(e.to_string());
        }
        match e {
            Error::Io(io) => CliError::Io(io.to_string()),
            Error::Png(p) => CliError::Io(p.to_string()),
            Error::Stage { stage, source } => CliError::Numerical {
                stage,
                message: source.to_string(),
            },
            other => CliError::Numerical {
                stage: stage.to_string(),
                message: other.to_string(),
            },
        }
    }

    /// For reading inputs: a missing or malformed file is a usage error.
    pub fn input(e: Error, what: &str) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) | Error::ShapeMismatch(_) | Error::InvalidParameter(_) | Error::NonFinite(_) => {
                CliError::Config(format!("{what}: {e}"))
            }
            other => CliError::from_core(other, what),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical { stage, message } => write!(f, "numerical failure in stage `{stage}`: {message}"),
            CliError::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Version line with build details.
pub fn long_version() -> String {
    format!(
        "{} (target {}, {} build, core {})",
        env!("CARGO_PKG_VERSION"),
        env!("TVDBAR_BUILD_TARGET"),
        env!("TVDBAR_BUILD_PROFILE"),
        tvdbar_core::VERSION,
    )
}

//! Command-line front end for `dirhdr`: ingestion, bandwidth selection,
//! HDR estimation, boundary distances and simulation runs.

pub mod commands;
pub mod export;
pub mod ingest;

use std::process::ExitCode;

use dirhdr_core::Error;

pub use commands::{run, Cli};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const NUMERIC: u8 = 3;
    pub const DEGENERATE: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("degenerate result: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => exit::VALIDATION,
            CliError::Degenerate(_) => exit::DEGENERATE,
            CliError::Core(e) => match e {
                Error::EmptyBoundary | Error::DegenerateRegion => exit::DEGENERATE,
                Error::AllInfinite | Error::EmFailed { .. } | Error::UniformData(_) | Error::PointMass => exit::NUMERIC,
                _ => exit::VALIDATION,
            },
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

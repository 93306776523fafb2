use std::io;
use std::path::PathBuf;

use finsler_core::FinslerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] FinslerError),

    #[error("invalid value for --{flag}: {message}")]
    Option { flag: &'static str, message: String },

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },

    #[error("cannot serialize output: {0}")]
    Serialize(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NO_CONVERGENCE: u8 = 3;
    pub const IO: u8 = 4;
}

impl CliError {
    pub fn option(flag: &'static str, message: impl Into<String>) -> Self {
        CliError::Option {
            flag,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) => match e {
                FinslerError::NoConvergence { .. }
                | FinslerError::StepLimitExceeded { .. }
                | FinslerError::NumericalNoise { .. }
                | FinslerError::DegenerateTensor { .. } => exit::NO_CONVERGENCE,
                FinslerError::InadmissibleModel(_) => exit::FAILED,
                _ => exit::CONFIG,
            },
            CliError::Option { .. } => exit::CONFIG,
            CliError::Read { .. } | CliError::Write { .. } | CliError::Serialize(_) => exit::IO,
        }
    }
}

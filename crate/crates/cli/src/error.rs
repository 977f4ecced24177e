use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Zero means the command completed.
pub mod exit {
    pub const USAGE: i32 = 2;
    pub const PARAMETER: i32 = 3;
    pub const DATA: i32 = 4;
    pub const IO: i32 = 5;
    pub const NUMERIC: i32 = 6;
    pub const STATE: i32 = 7;
    pub const FORMAT: i32 = 8;
    pub const SHAPE: i32 = 9;
    pub const CONFIG: i32 = 10;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] plc_core::Error),
    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use plc_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Parameter(_) => exit::PARAMETER,
                E::Data(_) => exit::DATA,
                E::Shape(_) => exit::SHAPE,
                E::Numeric { .. } => exit::NUMERIC,
                E::Format(_) => exit::FORMAT,
                E::State(_) => exit::STATE,
                E::Io(_) => exit::IO,
            },
            CliError::Config { .. } => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Usage(_) => exit::USAGE,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

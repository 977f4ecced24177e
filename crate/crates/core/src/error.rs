use std::io;

use thiserror::Error;

/// Errors raised across the concealment toolkit.
///
/// Variants are grouped by cause so callers (the CLI in particular) can map
/// them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or model parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Input data is missing, empty or too short for the requested operation.
    #[error("data error: {0}")]
    Data(String),

    /// Tensor or buffer dimensions disagree.
    #[error("shape error: {0}")]
    Shape(String),

    /// A computation produced a non-finite value or hit a singularity.
    #[error("numeric error in {op}: {msg}")]
    Numeric { op: &'static str, msg: String },

    /// A file does not follow its documented binary or text layout.
    #[error("format error: {0}")]
    Format(String),

    /// An operation was invoked before its prerequisites were in place.
    #[error("state error: {0}")]
    State(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn numeric(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Numeric { op, msg: msg.into() }
    }
}

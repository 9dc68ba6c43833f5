use std::io;

use thiserror::Error;

/// Errors produced across the toolkit.
///
/// The CLI maps these onto process exit codes: everything is "invalid input"
/// (2) except [`Error::TrainingDiverged`] (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at step {step}: {detail}")]
    TrainingDiverged { step: u64, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TrainingDiverged { .. } => 3,
            _ => 2,
        }
    }
}

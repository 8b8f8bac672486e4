use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("empty audio: {0}")]
    EmptyAudio(String),

    #[error("clip too short: {samples} samples, need at least {required}")]
    TooShort { samples: usize, required: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("corrupt artifact {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot: {0}")]
    Plot(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::ConfigMismatch(_)
            | Error::InvalidArgument(_)
            | Error::Shape { .. }
            | Error::InsufficientData(_)
            | Error::UnsupportedEncoding(_)
            | Error::EmptyAudio(_)
            | Error::TooShort { .. }
            | Error::NonFinite(_)
            | Error::Csv(_) => 2,
            Error::MissingArtifact(_) | Error::Corrupt { .. } => 3,
            Error::Divergence(_) => 4,
            _ => 1,
        }
    }
}

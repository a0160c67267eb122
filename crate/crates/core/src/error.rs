use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV stream: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("WAV stream contains no samples")]
    EmptyStream,

    #[error("sample {value} on channel {channel} is outside [-1, 1]")]
    AmplitudeOutOfRange { channel: usize, value: f64 },

    #[error("clip has {available} samples, {required} required")]
    ClipTooShort { required: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("model format: {0}")]
    ModelVersion(String),

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("window [{start:.3}, {end:.3}] s lies outside recording of {duration:.3} s")]
    WindowOutOfBounds { start: f64, end: f64, duration: f64 },

    #[error("training and test sets share recording id {0}")]
    RecordingOverlap(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for errors that originate from the filesystem or a file's contents.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Unreadable { .. }
                | Error::Unwritable { .. }
                | Error::MalformedWav(_)
                | Error::UnsupportedEncoding(_)
                | Error::EmptyStream
                | Error::Corrupt { .. }
                | Error::ModelVersion(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

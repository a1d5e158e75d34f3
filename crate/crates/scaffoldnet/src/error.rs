use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shape or dimension mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Bad input data (empty split, malformed one-hot, length mismatch, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Failed to read or decode an image file.
    #[error("cannot ingest image {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    /// Checkpoint file does not start with the expected magic bytes.
    #[error("corrupt checkpoint: bad magic bytes")]
    CheckpointMagic,

    /// Checkpoint format version is unknown.
    #[error("corrupt checkpoint: unsupported format version {0}")]
    CheckpointVersion(u32),

    /// Checkpoint ended before all declared content was read.
    #[error("corrupt checkpoint: truncated ({0})")]
    CheckpointTruncated(String),

    /// Checkpoint is structurally broken in some other way.
    #[error("corrupt checkpoint: {0}")]
    CheckpointMalformed(String),

    /// ROC requested on labels containing a single class.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by tagging, training, masking, and escrow operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data failed a structural check (bad BIO sequence, overlapping
    /// spans, and the like).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A text file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, example {example}: loss {loss}")]
    TrainingDiverged {
        epoch: usize,
        example: usize,
        loss: f64,
    },

    /// Parameter vectors of incompatible length were combined.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Authenticated decryption failed: wrong key or tampered data.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    /// A password or verifier check failed.
    #[error("authentication failed: {0}")]
    Auth(String),

    /// A requested record does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// A persisted file declares a format version this build does not read.
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    /// A persisted file is truncated or otherwise unreadable.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    /// A serialized document does not match its declared layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

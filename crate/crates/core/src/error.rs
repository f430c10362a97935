//! Crate-wide error type.
//!
//! Shape and configuration violations are reported as errors (not panics) at
//! every public API boundary so callers — the CLI in particular — can map them
//! to user-facing diagnostics.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, oversized windows, unknown
    /// variants, …). CLI maps this to a user-error exit.
    #[error("config: {0}")]
    Config(String),

    /// Tensor-shape mismatch in a public tensor/model operation.
    #[error("shape: {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Non-finite value where a finite one is required (forward inputs,
    /// gradients entering the optimizer, diverged losses).
    #[error("numerics: {0}")]
    NonFinite(String),

    /// Malformed on-disk artifact (snapshot file, checkpoint, metrics).
    #[error("format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for a [`Error::Shape`] with a formatted detail.
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    /// Shorthand for a [`Error::Config`] with a formatted detail.
    pub fn config(detail: impl Into<String>) -> Self {
        Error::Config(detail.into())
    }
}

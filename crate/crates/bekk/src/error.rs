//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by estimation, simulation, and I/O routines.
///
/// The CLI maps each variant class to a distinct process exit code, so new
/// variants should pick one of the three classes (config / data / numeric).
#[derive(Debug, Error)]
pub enum BekkError {
    /// Invalid argument, dimension mismatch, or malformed configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed or inconsistent data (files, panels).
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure (non-convergence, loss of finiteness).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BekkError>;

impl BekkError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        BekkError::InvalidInput(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        BekkError::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        BekkError::Numeric(msg.into())
    }
}

//! Robust, computationally efficient estimation of high-dimensional
//! BEKK-ARCH volatility models.
//!
//! The model's half-vectorized VAR form is fitted by truncated, l1-penalized
//! least squares (blockwise FISTA); the original BEKK coefficient matrices
//! are recovered through a padding/rearrangement construction and a spectral
//! decomposition. The crate also ships model selection (robust BIC and a
//! ridge-type component-count selector), tuning-parameter search by rolling
//! one-step forecast validation, a simulation/Monte Carlo harness, and a
//! minimum-variance portfolio backtester.

pub mod backtest;
pub mod cli;
pub mod design;
pub mod error;
pub mod fista;
pub mod io;
pub mod recovery;
pub mod linalg;
pub mod select;
pub mod serde_util;
pub mod simulate;

pub use error::{BekkError, Result};

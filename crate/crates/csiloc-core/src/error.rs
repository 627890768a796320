//! Error type shared by every module in the crate.

use alloc::string::String;
use thiserror::Error;

/// Failure raised by the numeric, modelling, and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input dimensions do not match what the operation requires.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A configuration value is out of range or internally inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An operation was called in a state it cannot serve, e.g. a backward
    /// pass without a cached forward pass.
    #[error("invalid call sequence: {0}")]
    Usage(String),
    /// A non-finite value appeared where finite data is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Loaded or derived state does not describe a usable model or context.
    #[error("inconsistent state: {0}")]
    Inconsistent(String),
}

pub type Result<T> = core::result::Result<T, Error>;

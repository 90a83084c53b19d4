//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong outside of plain arithmetic.
#[derive(Debug, Error)]
pub enum GaussBvError {
    /// A constructor argument violated a documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An iterative solve (projection multiplier, root find) did not converge.
    #[error("{what} did not converge after {iters} iterations")]
    NonConvergence { what: &'static str, iters: usize },

    /// Rejection sampling accepted too small a fraction to be usable.
    #[error("rejection acceptance rate {rate:.4} below floor {floor:.4}")]
    AcceptanceTooLow { rate: f64, floor: f64 },

    /// A path or estimate produced NaN or infinity.
    #[error("non-finite value in {what} (seed {seed}, batch {batch})")]
    NonFinite { what: &'static str, seed: u64, batch: u64 },

    /// Estimator mode incompatible with the supplied field's regularity.
    #[error("estimator mode `{mode}` requires {requirement}")]
    ModeMismatch { mode: &'static str, requirement: &'static str },

    /// Configuration file failed to parse or validate.
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// File output failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GaussBvError>;

//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by constructions, numerical routines, and experiment
/// plumbing. Variants carry enough context to be actionable from a test
/// failure or a CLI run.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An input value (vector, grid, sample) is malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A requested value lies outside the domain of a function.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A spectral quantity is too ill-conditioned to invert reliably.
    #[error("conditioning failure: {what} (condition estimate {cond:.3e}, cap {cap:.1e})")]
    Conditioning { what: String, cond: f64, cap: f64 },

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A smoothness case the bound machinery does not support.
    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    /// A bound was requested although its operator-concavity hypothesis
    /// was refuted by the randomized search.
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    /// The bias/spread balancing equation has no root in the bracket.
    #[error("balance failure: no sign change on [{lo:.3e}, {hi:.3e}] (residuals {f_lo:.3e}, {f_hi:.3e})")]
    BalanceFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

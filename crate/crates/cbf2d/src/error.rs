//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while assembling data or running a solve.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar parameter is outside its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: expected {expected_nx}x{expected_ny}, found {found_nx}x{found_ny}")]
    GridMismatch {
        expected_nx: usize,
        expected_ny: usize,
        found_nx: usize,
        found_ny: usize,
    },

    /// Problem data fails one of the admissibility checks performed at
    /// construction (weight not divergence-free, measurement pairing too
    /// small, incompatible initial observation, misaligned series, ...).
    #[error("inadmissible problem data: {0}")]
    Inadmissible(String),

    /// A velocity sample stopped being finite during time stepping.
    #[error("solution blew up at t = {time}: {what}")]
    BlowUp { time: f64, what: String },

    /// An explicit-term stability bound was violated at runtime.
    #[error("step constraint violated at t = {time}: {reason}")]
    StepConstraint { time: f64, reason: String },

    /// The per-step scalar equation of the marching reconstruction became
    /// degenerate.
    #[error(
        "marching reconstruction broke down at t = {time}: \
         |<step response, omega>| = {denominator:e} is below 1e-12"
    )]
    MarchingBreakdown { time: f64, denominator: f64 },

    /// Requested manufactured case does not exist.
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    /// Run-configuration text failed to parse.
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// CSV or binary input failed to parse.
    #[error("parse error at line {line}: {message}")]
    DataParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

//! Crate-wide error type.
//!
//! Variants are grouped so that callers (in particular the CLI) can map them
//! onto coarse failure classes: bad input, geometric infeasibility, or a
//! broken internal invariant.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An input file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A binary or JSON artifact had the wrong magic, version or length.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// The ball-fit LP (or a downstream matching step) has no solution.
    /// The message names the binding constraint group.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A cluster center's height is not covered by the reachable ball segment.
    #[error("cluster height {height} m outside ball segment range [{lo}, {hi}] m")]
    HeightNotCovered { height: f64, lo: f64, hi: f64 },

    /// A target in the sequence has no inverse-kinematics solution.
    #[error("target {index} has no IK solution; its layer is empty")]
    UnreachableTarget { index: usize },

    /// A value that must satisfy a structural invariant (orthonormal rotation,
    /// unit direction, horizontal base) failed validation.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }

    /// Process exit code for the CLI: 2 input error, 3 infeasible,
    /// 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Parse(_) | Error::Format(_) | Error::Io(_) => 2,
            Error::Infeasible(_)
            | Error::HeightNotCovered { .. }
            | Error::UnreachableTarget { .. } => 3,
            Error::InvariantViolation(_) => 4,
        }
    }
}

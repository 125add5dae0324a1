use thiserror::Error;

/// Errors raised by the library. Variants map one-to-one onto the CLI exit
/// codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// The channel document is not well formed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A model field violates an invariant; `path` names the offending entry,
    /// e.g. `sensing_kernel[1][0]`.
    #[error("invalid {path}: {reason}")]
    Validation { path: String, reason: String },

    /// An argument lies outside the domain of a closed-form expression or
    /// solver precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested budget or distortion target cannot be met by any input
    /// distribution or estimator.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A bisection stopped before reaching its tolerance. The best point found
    /// is attached in `f64` regardless of the solver scalar.
    #[error("no convergence: {reason} (best: mu={mu}, D={distortion}, R={rate_bits} bits)")]
    Stalled {
        reason: String,
        mu: f64,
        distortion: f64,
        rate_bits: f64,
    },

    /// A runtime invariant failed. Never expected on valid inputs.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Exit-code contract of the command line front end:
    /// 2 invalid input, 3 infeasible constraints, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation { .. } | Error::Domain(_) => 2,
            Error::Infeasible(_) => 3,
            Error::Stalled { .. } => 4,
            Error::Internal(_) | Error::Io(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

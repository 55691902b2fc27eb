use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} components, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("quadrature did not converge: error estimate {estimate:e} above tolerance {tolerance:e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },

    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("swarm has no agents")]
    EmptySwarm,

    #[error("kernel `{0}` has unbounded support; grid-accelerated evaluation needs a finite cutoff")]
    UnboundedSupport(String),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("field cannot be normalized: {0}")]
    NotNormalizable(String),

    #[error("agent {agent} reached a non-finite position at t = {time}; time step is too large")]
    NonFinitePosition { agent: usize, time: f64 },

    #[error("boundary overshoot {overshoot} exceeds domain extent {extent}; time step is too large")]
    Overshoot { overshoot: f64, extent: f64 },

    #[error("stability bound violated: {0}")]
    Stability(String),

    #[error("{path}: {message}")]
    Scenario { path: PathBuf, message: String },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

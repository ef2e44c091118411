use thiserror::Error;

use crate::network::BinaryPattern;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pattern length: {0}")]
    InvalidLength(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    /// A config key failed validation; `key` is the dotted path of the key.
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("step {step} mm too large for generator scale {scale} mm^-1 (product must be <= {limit})")]
    Stability { step: f64, scale: f64, limit: f64 },

    #[error("integration diverged at z = {z} mm: {reason}")]
    Diverged { z: f64, reason: String },

    #[error("fit failed: {reason}")]
    FitFailure {
        reason: String,
        /// Raw (z, value) series the fit was attempted on.
        series: Vec<(f64, f64)>,
    },

    #[error("no convergence after {sweeps} sweeps (last state {last})")]
    NonConvergence { sweeps: usize, last: BinaryPattern },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stability { .. } | Error::Diverged { .. } | Error::FitFailure { .. } | Error::NonConvergence { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}

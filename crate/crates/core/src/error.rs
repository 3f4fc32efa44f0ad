use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("step schedule rejected: {0}")]
    InvalidSchedule(String),

    #[error("projection policy rejected: {0}")]
    InvalidProjection(String),

    #[error("iterate became non-finite at step {step}")]
    NonFiniteIterate { step: usize },

    #[error("tail window is empty")]
    EmptyWindow,

    #[error("chain is not ergodic: invariant-distribution system is singular")]
    NonErgodic,

    #[error("deviation series mixes too slowly (decay ratio {ratio:.9} after {terms} terms)")]
    SlowMixing { ratio: f64, terms: usize },

    #[error("importance weights degenerate: sum underflowed to {0}")]
    DegenerateWeights(f64),

    #[error("enumeration budget exceeded: {blocks} blocks > {budget}")]
    BudgetExceeded { blocks: u128, budget: u128 },

    #[error("stationary point search did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

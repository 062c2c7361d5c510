use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("argument {x} outside the domain of {what}")]
    Domain { what: &'static str, x: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("root finder did not converge for x = {x} after {iterations} iterations")]
    Convergence { x: f64, iterations: usize },

    #[error("non-finite coefficient at step {step} (t = {t}): {detail}")]
    BlowUp { step: u64, t: f64, detail: String },

    #[error("mode count mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: usize, got: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("ensemble of {got} members is too small (need at least {need})")]
    InsufficientEnsemble { got: usize, need: usize },

    #[error("stopping threshold n = {n} already exceeded at t = 0")]
    StoppedAtStart { n: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed snapshot {path:?}: {reason}")]
    Format { path: Option<PathBuf>, reason: String },

    #[error("member {member} failed: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

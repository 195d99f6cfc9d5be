use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("equilibrium anomaly at gamma = {gamma}: {count} roots found (expected 1 or 3)")]
    EquilibriumAnomaly { gamma: f64, count: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

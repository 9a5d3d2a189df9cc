use thiserror::Error;

/// Errors raised by estimators, simulators, samplers and tuners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate simulation covariance")]
    DegenerateCovariance,

    #[error("degenerate copula correlation")]
    DegenerateCopula,

    #[error("parameter outside transform domain: {0}")]
    Domain(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("degenerate simulator output")]
    DegenerateSimulatorOutput,

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("invalid configuration for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}

pub(crate) fn invalid<T>(field: &str, reason: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    })
}

use thiserror::Error;

/// Errors produced by the stability solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Non-finite values appeared while integrating; the parameters are
    /// grossly unstable.
    #[error("numeric overflow at t = {t}")]
    NumericOverflow { t: f64 },

    #[error("quadrature did not converge: relative change {change:e} on refinement")]
    Quadrature { change: f64 },

    #[error("no transition in range")]
    NoTransition,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

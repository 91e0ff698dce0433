use thiserror::Error;

/// Errors raised by the estimators, the oracle and the experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied parameter violates its contract.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical procedure failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An experiment configuration is infeasible.
    #[error("configuration error: {0}")]
    Config(String),

    /// The divergence is +infinity (the integral functional is zero).
    #[error("divergence is infinite: integral functional is zero")]
    InfiniteDivergence,

    /// A log-log rate fit cannot be formed from the supplied errors.
    #[error("rate fit undefined: {0}")]
    FitUndefined(String),

    /// A sampler or evaluator broke one of its own guarantees.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

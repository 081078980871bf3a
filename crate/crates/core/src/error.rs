use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive quadrature ran out of subdivisions. Carries the best estimate
    /// and its error estimate so callers may still decide to use it.
    #[error("quadrature did not converge: estimate {estimate:e} with error {error:e}")]
    ConvergenceFailure { estimate: f64, error: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A truncated density has no mass on its support.
    #[error("density has zero mass on [{lower}, {upper}]")]
    ZeroMass { lower: f64, upper: f64 },

    #[error("malformed dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical routines.
///
/// The variants are grouped so that a front end can map them onto
/// distinct exit statuses: domain problems (bad input), solver or
/// quadrature failures (numerics gave up), and verification failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("convexity violation: {0}")]
    ConvexityViolation(String),
    #[error("point is not interior to the support (region {region})")]
    Region { region: String },
    #[error("integrability error: {0}")]
    Integrability(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for input/domain problems, as opposed to numerical failures.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::ConvexityViolation(_)
                | Error::Region { .. }
                | Error::Integrability(_)
                | Error::Config(_)
        )
    }
}

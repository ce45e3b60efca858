use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("{op} did not converge: {msg}")]
    Convergence { op: &'static str, msg: String },

    #[error("quadrature failed on [{a}, {b}]: estimated error {err:e} exceeds tolerance {tol:e}")]
    Quadrature { a: f64, b: f64, err: f64, tol: f64 },

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("Laplace inversion failed at x = {x}: {msg}")]
    Inversion { x: f64, msg: String },

    #[error("scale-function formula cancels terms of size {magnitude:e}; use the Wiener-Hopf route")]
    IllConditioned { magnitude: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("at y = {y}: {source}")]
    AtPoint {
        y: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn convergence(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Convergence { op, msg: msg.into() }
    }

    /// The error with any [`Error::AtPoint`] wrappers removed.
    pub fn innermost(&self) -> &Error {
        match self {
            Error::AtPoint { source, .. } => source.innermost(),
            other => other,
        }
    }

    /// True for failures caused by bad input rather than by a numerical routine.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) | Error::Config(_) => true,
            Error::AtPoint { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

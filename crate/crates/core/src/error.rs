use thiserror::Error;

use crate::expr::ExprError;
use crate::linalg::LinalgError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("no trial point within the support radius {radius} of {x:?}")]
    NoCoverage { x: Vec<f64>, radius: f64 },

    /// The local point set around `x` does not determine a unique
    /// weighted least squares polynomial, even after enlarging the support.
    #[error("local point set at {x:?} is not unisolvent (neighbors {indices:?}, radius {radius})")]
    NonUnisolvent {
        x: Vec<f64>,
        indices: Vec<usize>,
        radius: f64,
    },

    #[error("failed to evaluate {what} at {point:?}: {source}")]
    EvalAt {
        what: &'static str,
        point: Vec<f64>,
        #[source]
        source: ExprError,
    },

    #[error("collocation system is not solvable ({source}); condition estimate {condition_estimate:e}")]
    Solvability {
        condition_estimate: f64,
        #[source]
        source: LinalgError,
    },

    #[error("collocation projection undefined: {0}")]
    ProjectionUndefined(#[source] LinalgError),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

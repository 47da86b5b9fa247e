use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("point ({x}, {y}) lies outside the open domain")]
    Domain { x: f64, y: f64 },

    #[error("domain error: {0}")]
    DomainValue(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grids are not nested: {0}")]
    Alignment(String),

    #[error("singular tridiagonal system{context}: pivot {pivot:e} at row {row}")]
    Singular {
        row: usize,
        pivot: f64,
        context: String,
    },

    #[error("iterative solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("stability assumption violated: beta = {beta}")]
    AssumptionViolated { beta: f64 },

    #[error("path too short: need {needed} steps, have {available}")]
    PathTooShort { needed: usize, available: usize },

    #[error("scheme {0} needs a Levy-area sample on every step")]
    MissingLevyArea(&'static str),

    #[error("scheme/model mismatch: {0}")]
    SchemeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}

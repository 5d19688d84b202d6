use thiserror::Error;

/// Errors raised by density models, the moment kernel and the constructions built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: lower endpoint exceeds upper endpoint")]
    InvalidInterval { a: f64, b: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    QuadratureFailure { estimate: f64, error: f64 },

    #[error("cell [{a}, {b}] carries no probability mass")]
    EmptyCell { a: f64, b: f64 },

    #[error("target moment {target:e} exceeds the moment {available:e} left in the tail")]
    TargetTooLarge { target: f64, available: f64 },

    #[error("target moment must be a nonnegative number, got {0}")]
    InvalidTarget(f64),

    #[error("root solve failed: {0}")]
    RootFailure(String),

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("Lloyd iteration produced an empty cell at index {index}")]
    DegenerateCell { index: usize },

    #[error("the integral of h^(1/(1+r)) diverges; the Zador constant is infinite")]
    InfiniteZadorConstant,

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

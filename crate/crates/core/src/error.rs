use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("could not place sensor {sensor} after {attempts} attempts (hard-core packing infeasible)")]
    PackingFailure { sensor: usize, attempts: usize },

    #[error("source coincides with sensor {sensor}; Fisher information undefined")]
    DegenerateGeometry { sensor: usize },

    #[error("Fisher information matrix is singular (condition indicator {condition:e})")]
    SingularFim { condition: f64 },

    #[error("adaptive quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { estimate: f64, error: f64 },

    #[error("no geometry satisfies the conditioning predicate")]
    EmptySubset,

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what} is outside the domain of the operation (got {value})")]
    Domain { what: &'static str, value: f64 },

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error_estimate:e}")]
    Convergence { estimate: f64, error_estimate: f64 },

    /// A network or vector does not have the expected dimensions.
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// Not enough data to perform the operation.
    #[error("need at least {needed} samples, have {available}")]
    Sizing { needed: usize, available: usize },

    /// The scheduling constraints admit no feasible schedule.
    #[error("no schedule satisfies the deadline and concurrency constraints")]
    Infeasible,

    /// No trained generator or sample set exists for a (actuator, instant, quality) cell.
    #[error("no model for actuator {actuator}, instant {instant}, quality {quality}")]
    MissingCell {
        actuator: usize,
        instant: usize,
        quality: usize,
    },

    /// A configuration value violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

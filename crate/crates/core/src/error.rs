use thiserror::Error;

/// Errors produced by the analytic models, policy computations and the
/// simulator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An input is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver did not reach its tolerance.
    #[error("solver failed to converge: residual {residual:.3e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: u32 },

    /// A scenario or profile violates a structural invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A statistic was requested on too small a sample.
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// The simulator detected an internal accounting violation.
    #[error("simulation invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the truss analysis, sampling and optimisation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("element {element} is degenerate (current length {length:e})")]
    SingularGeometry { element: usize, length: f64 },

    #[error("matrix is singular ({zero_pivots} zero pivots)")]
    SingularMatrix { zero_pivots: usize },

    #[error("{phase}: no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        phase: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("arc-length step too small after {halvings} halvings")]
    StepTooSmall { halvings: usize },

    #[error("path following reached {steps} steps without approaching a stability point")]
    MaxStepsExceeded { steps: usize },

    #[error("linear buckling analysis: {0}")]
    Eigen(String),

    #[error("sobol dimension {requested} exceeds the direction-number table ({available})")]
    SobolDimension { requested: usize, available: usize },

    #[error("value {0} outside the open unit interval")]
    OutsideUnitInterval(f64),

    #[error("kernel matrix is ill-conditioned even with jitter {jitter:e}")]
    IllConditionedKernel { jitter: f64 },

    #[error("buckling statistics: {flagged} of {total} samples failed")]
    TooManyFlagged { flagged: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

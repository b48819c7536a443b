use thiserror::Error;

/// Errors raised by channel synthesis, beamforming and the optimizers.
///
/// Solver outcomes that an algorithm is expected to branch on (an infeasible
/// SOCP inside a bisection, say) are reported through status enums instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DamError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("power budget exceeded: requested {requested:e}, budget {budget:e}")]
    PowerBudgetExceeded { requested: f64, budget: f64 },

    #[error("zero-forcing infeasible: {0}")]
    InfeasibleZf(String),

    #[error("too few symbols for a reliable estimate: got {got}, need at least {need}")]
    EstimationQuality { got: usize, need: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("conic solver failure: {0}")]
    Solver(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

pub type Result<T> = std::result::Result<T, DamError>;

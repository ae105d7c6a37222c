use thiserror::Error;

use crate::train::TrainRun;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {count} outside supported range 1..={max}")]
    QubitCount { count: usize, max: usize },

    #[error("qubit index error: {0}")]
    QubitIndex(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid circuit spec: {0}")]
    Spec(String),

    /// A decomposition did not reproduce its target operator.
    #[error("decomposition check failed: fidelity {fidelity:.3e} below threshold")]
    Construction { fidelity: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("parameter-shift gradient unsupported: {0}")]
    UnsupportedGradient(String),

    #[error("two-site gate on non-adjacent sites {0} and {1}; route with SWAPs first")]
    NonAdjacent(usize, usize),

    #[error("bond dimension {bond} exceeds hard cap {cap} at step {step}")]
    BondOverflow { step: usize, bond: usize, cap: usize },

    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize, partial: Box<TrainRun> },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

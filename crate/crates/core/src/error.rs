use thiserror::Error;

use crate::machinery::IndexPlan;
use crate::witness::Witness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("horizon {horizon} must be smaller than the ambient dimension {dim}")]
    HorizonTooLarge { horizon: usize, dim: usize },

    #[error("basis is rank deficient ({rank} independent of {count} vectors)")]
    RankDeficientBasis { rank: usize, count: usize },

    #[error("Y_{k} is not contained in Y_{next} (residual {residual:.3e})", next = k + 1)]
    NotNested { k: usize, residual: f64 },

    #[error("Y_{k} and Y_{next} have the same span", next = k + 1)]
    NotStrict { k: usize },

    #[error("staircase vector q_{k} fails membership: {reason}")]
    BadStaircase { k: usize, reason: String },

    #[error("chain must contain at least one subspace")]
    EmptyChain,

    #[error("error sequence: {0}")]
    InvalidSequence(String),

    #[error("sequence is not non-increasing at index {index}")]
    NotNonIncreasing { index: usize },

    #[error("brute force supports at most 3 basis vectors, got {0}")]
    TooManyBasisVectors(usize),

    #[error("simplex hit its iteration cap of {0} pivots")]
    SimplexCycleGuard(usize),

    #[error("linear program: {0}")]
    InvalidProgram(String),

    #[error("descent did not reach tolerance after {iterations} iterations")]
    SolverStall { iterations: usize },

    #[error("span <q_{l}..q_{last}> is empty")]
    EmptySpan { l: usize, last: usize },

    #[error("invalid separation profile: {0}")]
    InvalidProfile(String),

    #[error("index recursion stalled at i = {stall_index}")]
    StalledPlan {
        stall_index: usize,
        plan: Box<IndexPlan>,
    },

    #[error("cannot build steps from a stalled plan")]
    PlanStalled,

    #[error("horizon exhausted: {0}")]
    HorizonExhausted(String),

    #[error("no index contributed to tilde-a")]
    NoContributors,

    #[error("targets must be positive, non-increasing, on strictly increasing indices: {0}")]
    TargetsNotMonotonic(String),

    #[error("witness iteration stagnated with residual {residual:.3e}")]
    NoProgress {
        residual: f64,
        witness: Box<Witness>,
    },

    #[error("mismatched inputs: {0}")]
    MismatchedInputs(String),

    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("{levels} polynomial levels exceed the {grid} grid points")]
    DegreeExceedsGrid { levels: usize, grid: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

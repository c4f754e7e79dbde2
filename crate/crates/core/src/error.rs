//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-side contract was violated (incompatible sizes, bad ranges, ...).
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// The state became NaN/Inf during integration or rollout.
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    /// Two states that must be distinct coincide exactly.
    #[error("duplicate centers: indices {0} and {1} coincide exactly")]
    DuplicateCenters(usize, usize),

    /// The Gram matrix could not be factorized even at the largest jitter.
    #[error("gram matrix not SPD up to jitter {max_jitter:e} (p = {p})")]
    SingularGram { p: usize, max_jitter: f64 },

    /// Not enough distinct states to select the requested centers.
    #[error("insufficient data: requested {requested}, have {available}")]
    InsufficientData { requested: usize, available: usize },

    /// Fewer than the required number of neighbors inside the radius.
    #[error("insufficient neighbors: {found} within radius {radius} (need {needed})")]
    InsufficientNeighbors {
        found: usize,
        needed: usize,
        radius: f64,
    },

    /// The local design matrix is numerically rank deficient.
    #[error("rank deficient local design: rank {rank} < {needed}")]
    RankDeficient { rank: usize, needed: usize },

    /// Too many centers failed their local regression.
    #[error("fit failed: {failed} of {total} centers unusable ({details})")]
    FitFailed {
        failed: usize,
        total: usize,
        details: String,
    },

    /// Trajectories passed together disagree on Δ, τ_d or state dimension.
    #[error("inconsistent trajectories: {0}")]
    InconsistentTrajectories(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty center set")]
    EmptyCenters,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("surrogate file error: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

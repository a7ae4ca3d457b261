use thiserror::Error;

/// Errors produced by the scheduling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("conditioning on an event of probability zero (attained {0})")]
    ConditionOnZeroEvent(String),
    #[error("alpha must be >= 1, got {0}")]
    InvalidAlpha(String),
    #[error("distributions are not close for any alpha up to {cap}")]
    NotCloseForAnyAlpha { cap: String },
    #[error("unsupported parametric pair: {0}")]
    UnsupportedPair(String),
    #[error("shift out of range for atom {atom}: {reason}")]
    ShiftOutOfRange { atom: usize, reason: String },
    #[error("total mass after shift is {0}, expected 1")]
    MassNotNormalized(String),
    #[error("perturbation generation failed after {0} attempts")]
    GenerationFailed(usize),
    #[error("quantum {index} of job {job} sorts before its predecessor")]
    OrderInversion { job: usize, index: usize },
    #[error("schedule leaves job {job} unfinished (attained {attained}, size {size})")]
    IncompleteSchedule {
        job: usize,
        attained: String,
        size: String,
    },
    #[error("schedule covers {covered} of job {job}, but its largest size is {needed}")]
    ScheduleDoesNotCover {
        job: usize,
        covered: String,
        needed: String,
    },
    #[error("state space of size {size} exceeds the cap {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid realization: {0}")]
    InvalidRealization(String),
    #[error("cannot parse number {0:?}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

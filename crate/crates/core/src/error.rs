use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("class count mismatch: expected {expected}, got {got}")]
    ClassMismatch { expected: usize, got: usize },

    #[error("invalid reward family: {0}")]
    InvalidReward(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("point {0} already observed")]
    DuplicateObservation(usize),

    #[error("downdate out of order: token {token} does not match stack top {top}")]
    OutOfOrderDowndate { token: usize, top: usize },

    #[error("invalid neighbor graph: {0}")]
    InvalidGraph(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("enumeration limit exceeded: {outcomes} outcomes > limit {limit}")]
    EnumerationLimit { outcomes: u128, limit: u64 },

    #[error("batch size {requested} exceeds pool multiplicity {available}")]
    BatchTooLarge { requested: usize, available: usize },

    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("search budget {budget} exceeds unlabeled pool of size {unlabeled}")]
    BudgetExceedsPool { budget: usize, unlabeled: usize },

    #[error("no candidates available for selection")]
    NoCandidates,

    #[error("budget exhausted: t = {t}, budget = {budget}")]
    BudgetExhausted { t: usize, budget: usize },

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("malformed input file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

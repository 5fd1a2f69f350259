use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid battlefield {index}: {reason}")]
    InvalidBattlefield { index: usize, reason: String },

    #[error("invalid game instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: expected {expected} battlefields, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("allocation exceeds budget: sum {sum} > budget {budget}")]
    InfeasibleAllocation { sum: f64, budget: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("kappa must be strictly positive, got ({0}, {1})")]
    NonPositiveKappa(f64, f64),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid rectangle: {0}")]
    InvalidRect(String),

    #[error("boundary refinement failed on segment t in [{t0}, {t1}] after {depth} subdivisions")]
    RefinementFailed { t0: f64, t1: f64, depth: u32 },

    #[error("best-response grid too large: {cells} DP cells (limit {limit}); use a coarser grid step")]
    GridTooLarge { cells: u128, limit: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment spec: {0}")]
    InvalidExperiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

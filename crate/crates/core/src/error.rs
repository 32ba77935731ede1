use thiserror::Error;

/// Which side of the per-user power box was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerBound {
    /// Reference slot: `1 / (p_k * P * beta) <= 1`.
    Reference,
    /// Data slot: `p_k * E_k * d^2 <= P * beta`.
    Data,
    /// Non-finite or non-positive scalar.
    NotFinite,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rate allocation: {0}")]
    InvalidRate(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("enumeration cap exceeded: {needed} items > cap {cap}")]
    CapExceeded { needed: u128, cap: u64 },

    #[error("infeasible power on sub-constellation {index}: {bound:?} bound, value {value:e} vs limit {limit:e}")]
    InfeasiblePower {
        index: usize,
        bound: PowerBound,
        value: f64,
        limit: f64,
    },

    #[error("invalid system profile: {0}")]
    InvalidProfile(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

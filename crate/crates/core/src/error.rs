use thiserror::Error;

/// Errors raised by the auction, equilibrium and certificate routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),

    #[error("invalid bid: {0}")]
    InvalidBid(String),

    #[error("unit count {x} outside 1..={k}")]
    UnitsOutOfRange { x: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("bid grid is empty")]
    EmptyGrid,

    #[error("search space of {size} profiles exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("equilibrium welfare must be positive, got {0}")]
    NonPositiveWelfare(f64),

    #[error("valuation class mismatch: {0}")]
    ClassMismatch(String),

    #[error("profile not in canonical form: {0}")]
    NotCanonical(String),

    #[error("no tie-break rule realizes the requested allocation")]
    NoTieBreak,

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown instance '{0}'")]
    UnknownInstance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

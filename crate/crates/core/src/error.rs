use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {index} has norm {norm} outside the ball of radius {radius}")]
    PointOutsideBall {
        index: usize,
        norm: f64,
        radius: f64,
    },

    #[error("empty subset where at least one point is required")]
    EmptySubset,

    #[error("center set is empty")]
    EmptyCenterSet,

    #[error("center set cardinality mismatch: {left} vs {right}")]
    CardinalityMismatch { left: usize, right: usize },

    #[error("exact oracle refused: n = {n} exceeds the enumeration guard {max}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("subroutine failed: {0}")]
    Subroutine(String),

    #[error("one-cluster search accepted no level in round {round}")]
    OneClusterFailed { round: usize },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

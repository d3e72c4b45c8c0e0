use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfrError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: u32, found: u32 },

    #[error("element {elem:#x} does not fit in F_2^{dim}")]
    ElementOutOfRange { elem: u64, dim: u32 },

    #[error("ambient dimension {0} is not supported (max {max})", max = crate::group::MAX_DIM)]
    UnsupportedDimension(u32),

    #[error("subgroup rank {0} is too large to enumerate")]
    RankTooLarge(usize),

    #[error("empty set or support")]
    Empty,

    #[error("unknown axis label `{0}`")]
    UnknownAxis(String),

    #[error("axis sets overlap")]
    OverlappingAxes,

    #[error("conditioning event has zero mass")]
    ZeroMass,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("malformed map: {0}")]
    MalformedMap(String),

    #[error("map is not GF(2)-linear")]
    NonLinearMap,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cost guard: {0}")]
    CostGuard(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PfrError>;

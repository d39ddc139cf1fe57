use thiserror::Error;

/// Errors produced while building tessellations, operators, or compressed
/// representations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry dimension {0}; expected 1, 2, or 3")]
    InvalidDimension(usize),

    #[error("block count {count} is not a {dim}-th power of a positive integer")]
    NotAPower { count: usize, dim: usize },

    #[error("point {index} lies outside the unit hypercube")]
    PointOutOfRange { index: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank {k} must be smaller than the maximum block size {m}")]
    RankTooLarge { k: usize, m: usize },

    #[error("requested {requested} null vectors but the residual {residual:.3e} exceeds tolerance")]
    InsufficientNullity { requested: usize, residual: f64 },

    #[error("degenerate tagging matrix at block {block}: {reason}")]
    DegenerateTags { block: usize, reason: String },

    #[error("block {0} has an empty far field")]
    EmptyFarField(usize),

    #[error("box coloring is invalid: blocks {0} and {1} share a neighbor and a color")]
    InvalidColoring(usize, usize),

    #[error("singular interior system: {0}")]
    Singular(String),

    #[error("operator norm estimate is zero")]
    ZeroNorm,

    #[error("malformed container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

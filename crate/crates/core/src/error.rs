use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {index} at {coords:?} lies outside the grid bounds")]
    OutOfBounds { index: usize, coords: Vec<f64> },

    #[error("fit needs at least 2 distinct epsilons, got {0}")]
    TooFewScales(usize),

    #[error("zero occupied boxes at epsilon {0}; log undefined")]
    EmptyScale(u32),

    #[error("empty cloud")]
    EmptyCloud,

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error("invalid symbol model: {0}")]
    InvalidModel(String),

    #[error("degenerate labels: training data must contain both classes")]
    DegenerateLabels,

    #[error(
        "SMO did not converge after {passes} passes \
         (max KKT violation {max_violation:.3e}, {n_sv} support vectors)"
    )]
    NotConverged {
        passes: usize,
        max_violation: f64,
        n_sv: usize,
    },

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("insufficient cells for trend: {0}")]
    InsufficientCells(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

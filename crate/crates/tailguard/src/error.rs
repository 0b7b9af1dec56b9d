use thiserror::Error;

/// Errors surfaced by the calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("out of bounds at index {index}: {value} not in [{lo}, {hi}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid probability level: {0}")]
    InvalidLevel(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("use bootstrap variance for point-mass measures")]
    PointMassVariance,

    #[error("non-monotone boundary at index {0}")]
    NonMonotoneBoundary(usize),

    #[error("prompt has no candidates: {0}")]
    EmptyPrompt(String),

    #[error("duplicate (prompt_id, response_id): ({0}, {1})")]
    DuplicateRecord(String, String),

    #[error("lambda {0} is not on the grid")]
    LambdaNotOnGrid(f64),

    #[error("malformed data at line {line}: {message}")]
    MalformedData { line: u64, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix must have at least one row and one column (got {m}x{d})")]
    EmptyMatrix { m: usize, d: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(
        "rank-deficient matrix: rank {rank} < d = {d}; singular value #{index} = {value:e} \
         is not above the tolerance {tol:e}"
    )]
    RankDeficient {
        rank: usize,
        d: usize,
        index: usize,
        value: f64,
        tol: f64,
    },

    #[error("m = {m} exceeds the enumeration cap of {cap} rows")]
    EnumerationCap { m: usize, cap: usize },

    #[error("matrix does not have orthonormal columns (max |A^T A - I| = {deviation:e}); whiten it first")]
    NotWhitened { deviation: f64 },

    #[error("invalid sign pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("search exhausted after {attempts} attempts: {what}")]
    SearchExhausted { attempts: usize, what: String },

    #[error("observation {point:?} is not in the unique-approximation region: {reason}")]
    OutsideUniqueRegion { point: Vec<f64>, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported wavelet order (d, dt) = ({d}, {dt}); implemented set is (2,2), (2,4), (3,5)")]
    UnsupportedOrder { d: usize, dt: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("coefficient flavor mismatch: expected {expected:?}, got {got:?}")]
    FlavorMismatch {
        expected: crate::wavelets::Flavor,
        got: crate::wavelets::Flavor,
    },

    #[error("level {level} out of range [{min}, {max}]")]
    LevelOutOfRange { level: usize, min: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resolution too coarse: {0}")]
    Resolution(String),

    #[error("under-determined regression: column {column} has |Omega| = {omega} > N = {n}")]
    UnderDetermined {
        column: String,
        omega: usize,
        n: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("internal invariant violation: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

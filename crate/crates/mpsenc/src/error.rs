use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("oracle evaluation is not finite at x = {x}")]
    NonFiniteEvaluation { x: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("value {x} outside the support [0, {support}]")]
    Domain { x: f64, support: f64 },
    #[error("truncation constant R^2 = {0:e} is too small to normalize the density")]
    UnsupportedTruncation(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("circuit contains an unlowered two-qubit unitary at gate {0}")]
    Unlowered(usize),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

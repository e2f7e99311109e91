use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix dimension must be positive")]
    EmptyMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPositiveSemidefinite { min_eig: f64 },
    #[error("basis of {cols} vectors in dimension {rows} is rank deficient")]
    RankDeficient { rows: usize, cols: usize },
    #[error("cost matrix is not positive definite (min eigenvalue {min_eig:e})")]
    CostNotPositive { min_eig: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("starting point required: {0}")]
    MissingStart(String),
    #[error("epoch limit exceeded: {epochs} epochs for dimension {n}")]
    EpochLimit { epochs: usize, n: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported file: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

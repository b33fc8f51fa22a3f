use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("index {0} already labeled")]
    AlreadyLabeled(usize),

    #[error("point cloud has no ground-truth labels")]
    MissingLabels,

    #[error("ply: line {line}: {msg}")]
    Ply { line: usize, msg: String },

    #[error("matrix file: {0}")]
    Matrix(String),

    #[error("config: {0}")]
    Config(String),

    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error in {file}: {message}")]
    Format { file: String, message: String },

    #[error("parse error in {file} at row {row}, column {col}: {message}")]
    Parse {
        file: String,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate curve at row {row}: {message}")]
    DegenerateCurve { row: usize, message: String },

    #[error("training failed at epoch {epoch}: {message}")]
    TrainingFailure { epoch: usize, message: String },

    #[error("memory budget exceeded: {0}")]
    CapacityExceeded(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// Factorization failure; on the systems built here this means an assembly bug.
    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

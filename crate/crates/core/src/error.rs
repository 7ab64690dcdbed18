use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("degenerate body: rank {rank} of {dim}")]
    Degenerate { rank: usize, dim: usize },
    #[error("resolution exhausted at depth {0}")]
    ResolutionExhausted(usize),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Domain(msg.into()))
}

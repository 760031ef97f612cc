use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("placement infeasible at node {node} after {retries} retries")]
    PlacementInfeasible { node: usize, retries: u32 },

    #[error("realization extinct at depth {depth}")]
    ExtinctDepth { depth: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("environment not enumerable; use kappa_monte_carlo")]
    NonEnumerable,

    #[error("empty row")]
    EmptyRow,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_config(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

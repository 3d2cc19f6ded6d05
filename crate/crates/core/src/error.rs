use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration error: {0}")]
    Integration(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("picard iteration failed to contract: {0}")]
    NonContraction(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

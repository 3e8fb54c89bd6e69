use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("covariance could not be repaired to a positive semi-definite matrix")]
    NotPsd,
}

pub type Result<T> = std::result::Result<T, Error>;

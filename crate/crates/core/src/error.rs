use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("history window must be at least 2 to form differences (got {0})")]
    InvalidWindow(usize),
    #[error("q-table holds no visited state-action pair")]
    NoExperience,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("q-table parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

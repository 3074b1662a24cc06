use std::io;

use thiserror::Error;

/// Errors raised across the re-ranking pipeline.
#[derive(Debug, Error)]
pub enum PrsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("resource guard exceeded: {0}")]
    Resource(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, PrsError>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PrsError::Shape(msg.into()))
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("malformed graph: {0}")]
    Structure(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A feature value fell outside the declared `[alpha, beta]` range.
    /// Encoding such a value would silently void the privacy guarantee.
    #[error("feature {index} = {value} lies outside [{alpha}, {beta}]")]
    Domain {
        index: usize,
        value: f64,
        alpha: f64,
        beta: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("privacy budget violation: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid aircraft spec: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key: {0}")]
    UnknownKey(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({context})")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("lifecycle error: {0}")]
    Lifecycle(String),

    #[error("stale cache: {0}")]
    StaleCache(&'static str),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }
}

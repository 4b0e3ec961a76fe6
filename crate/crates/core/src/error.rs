use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid identity digest `{0}`")]
    InvalidDigest(String),

    #[error("synonym table: {0}")]
    Synonyms(String),

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("embedding provider `{provider}` failed at text {index}: {message}")]
    Provider {
        provider: String,
        index: usize,
        message: String,
    },

    #[error(
        "{count} unique texts exceed the all-pairs limit of {limit}; pass allow_large to proceed"
    )]
    TooLarge { count: usize, limit: usize },

    #[error("{path}:{line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },

    #[error("fold {fold} contains a single class; use fewer folds or more pairs")]
    SingleClassFold { fold: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

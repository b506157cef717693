use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("user `{0}` has fewer than 2 triples and cannot be split")]
    UserTooSmall(String),

    #[error("graph is empty after filtering; try a lower degree threshold")]
    EmptyGraph,

    #[error("user {0} has no test items")]
    EmptyTestSet(u32),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

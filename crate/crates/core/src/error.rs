use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Malformed {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{file}: empty basket at line {line}")]
    EmptyBasket { file: PathBuf, line: usize },

    #[error("item {0:?} has no category")]
    MissingCategory(String),

    #[error("item {0:?} is not in the catalog")]
    UnknownItem(String),

    #[error("user {0:?} appears more than once")]
    DuplicateUser(String),

    #[error("empty corpus after preprocessing")]
    EmptyCorpus,

    #[error("user {user:?} has {baskets} basket(s); at least {required} needed")]
    TooFewBaskets {
        user: String,
        baskets: usize,
        required: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

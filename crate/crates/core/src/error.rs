use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("duplicate skill id {0:?}")]
    DuplicateSkill(String),

    #[error("skill {0:?} has an empty preferred label")]
    EmptyLabel(String),

    #[error("skill {0:?} lists itself as a broader concept")]
    SelfParent(String),

    #[error("unknown skill {0:?}")]
    UnknownSkill(String),

    #[error("duplicate sentence id {0:?}")]
    DuplicateSentence(String),

    #[error("sentence {0:?} has empty text")]
    EmptySentence(String),

    #[error("text has no content after normalization")]
    ZeroContent,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("bad magic: not an embedding store")]
    BadMagic,

    #[error("unsupported embedding store version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated record {index} (key {key:?})")]
    TruncatedRecord { index: u64, key: String },

    #[error("non-finite value in vector {0:?}")]
    NonFiniteValue(String),

    #[error("duplicate embedding key {0:?}")]
    DuplicateKey(String),

    #[error("missing vectors for {} id(s): {}", .0.len(), preview(.0))]
    MissingVectors(Vec<String>),

    #[error("no negative pool for skill {0:?}: no other skill has positives")]
    EmptyUniformPool(String),

    #[error("non-finite loss while training {0:?}; embeddings may be corrupt")]
    NonFiniteLoss(String),

    #[error("model set is empty")]
    EmptyModelSet,

    #[error("gold label set is empty")]
    EmptyGold,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Invalid(String),
}

fn preview(ids: &[String]) -> String {
    let mut s = ids.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > 10 {
        s.push_str(", ...");
    }
    s
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }
}

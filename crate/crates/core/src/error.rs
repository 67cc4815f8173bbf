use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("unknown label at line {line}: {label:?}")]
    UnknownLabel { line: usize, label: String },

    #[error("unknown label {0:?}")]
    InvalidLabel(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported {what} version {version}")]
    UnsupportedVersion { what: &'static str, version: u64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("duplicate headline id {0:?}")]
    DuplicateId(String),

    #[error("missing embedding for headline id {0:?}")]
    MissingEmbedding(String),

    #[error("member {member}: missing embedding for headline id {id:?}")]
    MissingMemberEmbedding { member: usize, id: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty token sequence for {0:?}")]
    EmptySequence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no usable training pairs")]
    NoPairs,

    #[error("metric undefined: no rows left after dropping bad labels")]
    MetricUndefined,

    #[error("model schema error: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

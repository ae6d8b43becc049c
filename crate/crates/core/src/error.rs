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
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate entity id `{entity_id}`")]
    DuplicateEntity {
        path: PathBuf,
        line: usize,
        entity_id: String,
    },

    #[error("mention `{mention_id}` refers to unknown entity `{gold_entity_id}`")]
    UnknownGoldEntity {
        mention_id: String,
        gold_entity_id: String,
    },

    #[error("mention `{mention_id}` has empty mention text")]
    EmptyMention { mention_id: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("context budget of {budget} tokens cannot hold a mention of {mention_tokens} tokens plus template")]
    ContextBudget {
        budget: usize,
        mention_tokens: usize,
    },

    #[error("entity `{0}` has no views")]
    NoViews(String),

    #[error("no view set for entity `{0}`")]
    MissingViewSet(String),

    #[error("index is empty")]
    EmptyIndex,

    #[error("stale artifact: built with encoder {expected}, current encoder is {actual}")]
    StaleFingerprint { expected: String, actual: String },

    #[error("oracle limit exceeded: {basic} basic views (max {max})")]
    OracleLimit { basic: usize, max: usize },

    #[error("gold entity `{0}` is not among the batch candidates")]
    GoldMissing(String),

    #[error("bad {what} file: {message}")]
    Format { what: &'static str, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }
}

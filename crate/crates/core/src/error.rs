use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Integrity,
    Io,
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integrity violation{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Integrity {
        line: Option<usize>,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("triple ({subject} | {relation} | {object}) has no supporting chunk")]
    MissingCitation {
        subject: String,
        relation: String,
        object: String,
    },

    #[error("node {0} has no entity neighbours to walk to")]
    EmptyDistribution(String),

    #[error("view rooted at {0} cannot be corrupted without breaking the fact-edge floor")]
    NotCorruptible(String),

    #[error("view rooted at {0} has no fact edges")]
    NoFactEdges(String),

    #[error("no training views could be built: {0}")]
    EmptyEpoch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cannot pool an empty view")]
    EmptyView,

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint expects {expected}, found {found}")]
    ConfigMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("embedding provider: {0}")]
    Provider(String),

    #[error("completion backend: {0}")]
    Backend(String),

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(String),
}

impl Error {
    pub fn integrity(message: impl Into<String>) -> Self {
        Error::Integrity {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn integrity_at(line: usize, message: impl Into<String>) -> Self {
        Error::Integrity {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::ConfigMismatch { .. } => ErrorKind::Config,
            Error::Parse { .. }
            | Error::Integrity { .. }
            | Error::MissingCitation { .. }
            | Error::Checkpoint(_) => ErrorKind::Integrity,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Other,
        }
    }
}

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("family `{family}` is mapped to two clans (`{first}` and `{second}`)")]
    FamilyClanConflict {
        family: String,
        first: String,
        second: String,
    },

    #[error("checkpoint magic mismatch: expected \"HPO1\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("checkpoint truncated: {0}")]
    Truncated(String),

    #[error("checkpoint manifest mismatch: {0}")]
    Manifest(String),

    #[error("config hash mismatch: checkpoint has {checkpoint}, current config has {current}")]
    ConfigMismatch { checkpoint: String, current: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

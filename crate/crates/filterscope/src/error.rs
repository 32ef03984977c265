use std::io;
use std::path::PathBuf;

/// Process exit code for configuration and validation failures.
pub const EXIT_VALIDATION: i32 = 2;
/// Process exit code when a labeling backend could not be reached.
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] filterscope_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("stage `{stage}`: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Backend(_) => EXIT_BACKEND,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::config::ConfigErrors;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),

    #[error("configuration errors:\n{0}")]
    ConfigFile(#[from] ConfigErrors),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::ConfigFile(_) => EXIT_CONFIG,
            HarnessError::Numeric(_) => EXIT_NUMERIC,
            HarnessError::Io { .. } => EXIT_IO,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.as_ref().display().to_string(), source }
    }
}

impl From<rwmlab::Error> for HarnessError {
    fn from(e: rwmlab::Error) -> Self {
        match e {
            rwmlab::Error::Numeric { .. } => HarnessError::Numeric(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] flowvqe_core::error::Error),

    #[error("config field `{field}`: {message}")]
    Config { field: &'static str, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv export: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Serialize(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

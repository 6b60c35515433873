use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsdaError {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration (or dataset shape) cannot be satisfied.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    /// Training produced a non-finite loss. `dump` names the diagnostic file, if one was written.
    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite {
        step: usize,
        detail: String,
        dump: Option<PathBuf>,
    },

    #[error("refusing to overwrite existing artifact {0}")]
    ArtifactExists(PathBuf),

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CsdaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CsdaError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn load(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        CsdaError::Load {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// True for errors caused by the user's configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, CsdaError::Config(_) | CsdaError::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, CsdaError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(CsdaError::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(CsdaError::Config(msg.into()))
}

use scvi::ScviError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// A configuration that violates a named requirement; exit code 2.
    #[error("invalid config: {name}: {reason}")]
    Config { name: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Solver(#[from] ScviError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_error(name: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        name: name.into(),
        reason: reason.into(),
    }
}

pub(crate) fn io_error(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

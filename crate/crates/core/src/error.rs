use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("data: {0}")]
    Data(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("model: {0}")]
    Model(String),
    #[error("external predictor protocol: {0}")]
    Protocol(String),
    #[error("external predictor timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("external predictor exited: {0}")]
    ProcessExited(String),
    #[error("causal discovery: {0}")]
    Discovery(String),
    #[error("causal effects: {0}")]
    Effects(String),
    #[error("attribution: {0}")]
    Attribution(String),
    #[error("evaluation: {0}")]
    Evaluation(String),
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

    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Config(_))
    }
}

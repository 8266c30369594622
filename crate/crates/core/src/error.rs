//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its domain (non-finite coordinate,
    /// negative threshold, coincident points for a bearing, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Fewer samples than the operation needs.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Timestamps must be strictly increasing.
    #[error("timestamps not strictly increasing in {context}: t[{index}] = {value} follows {prev}")]
    Ordering {
        context: String,
        index: usize,
        value: f64,
        prev: f64,
    },

    /// A data file could not be parsed; `line` is 1-based.
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Missing channel, bad manifest, model/feature mismatch, ...
    #[error("configuration error: {0}")]
    Config(String),

    /// `resample` only decimates.
    #[error("unsupported upsampling: target {target_hz} Hz exceeds source {source_hz} Hz")]
    Upsampling { source_hz: f64, target_hz: f64 },

    /// An attack scenario's preconditions do not hold on the given trace.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// Tensor/window shape disagreement.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// A model file has the wrong magic or version tag.
    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("route script has no segments")]
    EmptyRoute,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        Error::Scenario(msg.into())
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

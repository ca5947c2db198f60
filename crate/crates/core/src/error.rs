//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration or arguments (empty architectures, invalid ratios, duplicate seeds).
    #[error("invalid config: {0}")]
    Config(String),

    /// Matrix/vector shape disagreement.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input data does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Malformed or unusable data (missing columns, single-class labels, empty groups).
    #[error("data error: {0}")]
    Data(String),

    /// A metric is undefined on the given inputs (e.g. AUC with one class).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Non-finite values encountered during optimization.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Process exit code this error class maps to (usage=1, data=2, numerical=3).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Schema(_)
            | Error::Data(_)
            | Error::Shape(_)
            | Error::UndefinedMetric(_)
            | Error::Io { .. }
            | Error::Serde(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

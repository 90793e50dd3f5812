use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required columns: {}", .missing.join(", "))]
    Schema { missing: Vec<String> },

    #[error("duplicate vehicle id {0} in static data")]
    DuplicateVehicle(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{context}: could not parse {value:?}")]
    Parse { context: String, value: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("feature alignment: {0}")]
    Alignment(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("all learning rates diverged: {0}")]
    AllDiverged(String),

    #[error("models identical on this set: every paired difference is zero")]
    IdenticalErrors,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, value: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            value: value.into(),
        }
    }
}

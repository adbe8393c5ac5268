use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size must be at least 3, got {0}")]
    InvalidSize(usize),
    #[error("plaquettes {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("total rate is zero; the configuration is frozen")]
    Frozen,
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
    #[error("point skipped: estimated {0:.3e} events exceed the budget")]
    OverBudget(f64),
    #[error("invalid parameter `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition or type invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot parse row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("training failed: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("training split contains a single class")]
    SingleClass,

    #[error(
        "regression system is singular: coalition design has rank {rank} but {expected} is required"
    )]
    RankDeficient { rank: usize, expected: usize },

    #[error(
        "exact enumeration supports at most {max} features (got {d}); use the kernel estimator"
    )]
    TooManyFeatures { d: usize, max: usize },

    #[error("campaign failed at fold {fold}, model seed {model_seed}: {source}")]
    Campaign {
        fold: usize,
        model_seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

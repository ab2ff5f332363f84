use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("profile {id}: missing channel {channel}")]
    MissingChannel { id: String, channel: String },

    #[error("profile {id}: channel lengths differ ({detail})")]
    UnequalChannels { id: String, detail: String },

    #[error("duplicate profile id {0}")]
    DuplicateId(String),

    #[error("invalid profile {id}: {message}")]
    InvalidProfile { id: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input")]
    Empty,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unknown id {0}")]
    UnknownId(String),

    #[error("warping window {window} admits no path between lengths {n} and {m}")]
    NoWarpingPath { window: usize, n: usize, m: usize },

    #[error("need at least two labels, found {0}")]
    TooFewLabels(usize),

    #[error("label {label} has {count} profiles, fewer than {k} folds")]
    LabelTooSmall { label: String, count: usize, k: usize },

    #[error("nothing to render")]
    NothingToRender,

    #[error("JSON serialization failed")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

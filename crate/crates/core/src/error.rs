use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("path library is empty")]
    EmptyLibrary,

    #[error("library entry {index}: {reason}")]
    LibraryEntry { index: usize, reason: String },

    #[error("phase span is empty")]
    EmptyPhaseSpan,

    /// Every node of the tree sits at its terminal phase; the caller skips
    /// the iteration and draws again later.
    #[error("no expandable node in tree")]
    NoExpandableNode,

    #[error("could not generate a problem for scene '{scene}': {reason}")]
    Generation { scene: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

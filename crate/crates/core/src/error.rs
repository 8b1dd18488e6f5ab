//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({i}, {j}) out of range for graph with {n} nodes")]
    EdgeOutOfRange { i: usize, j: usize, n: usize },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("graph is disconnected ({components} components); run per component")]
    Disconnected { components: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("no convergence after {cap} iterations (residual {residual:.3e})")]
    IterationCap { cap: usize, residual: f64 },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("labeled mask is empty")]
    EmptyMask,

    #[error("sampled mode needs at least {min} pairs, got {got}")]
    TooFewPairs { got: usize, min: usize },

    #[error("class {class} has {available} nodes, split needs {needed}")]
    ClassTooSmall {
        class: usize,
        available: usize,
        needed: usize,
    },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("meta.json field {field}: expected {expected}, found {actual}")]
    MetaMismatch {
        field: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Helper for the common "open or read a file" failure.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

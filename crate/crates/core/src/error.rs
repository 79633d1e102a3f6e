use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix has no eigenvalue above the clamp threshold")]
    SingularMatrix,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("optimization diverged at iteration {iteration}")]
    DivergedOptimization { iteration: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("refusing to write an empty series to {0}")]
    EmptySeries(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

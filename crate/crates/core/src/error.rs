use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;
use crate::eval::EvalError;
use crate::extract::ExtractError;
use crate::ir::IrError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("duplicate task_id '{0}'")]
    DuplicateTaskId(String),
    #[error("problem '{0}' has no description")]
    MissingDescription(String),
    #[error("invalid problem '{task_id}': {message}")]
    InvalidProblem { task_id: String, message: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("stage '{0}' requested but its artifact is absent")]
    Composition(String),
    #[error("unsupported strategy '{0}'")]
    UnsupportedStrategy(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

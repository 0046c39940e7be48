use std::path::PathBuf;

use thiserror::Error;

use crate::nnls::NnlsError;
use crate::solver::FitReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    /// A value or structure violates a type invariant.
    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),

    #[error(transparent)]
    Nnls(#[from] NnlsError),

    /// The fit produced a non-finite objective. The partial report is kept.
    #[error("fit aborted at sweep {sweep}: {detail}")]
    Diverged {
        sweep: usize,
        detail: String,
        report: Box<FitReport>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}

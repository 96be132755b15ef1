use std::path::PathBuf;

use lpdo_core::LpdoError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    BadFile { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] LpdoError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// 1 for failed invariants, 2 for bad usage or configuration, 3 for
    /// file and I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::BadFile { .. } | HarnessError::Csv(_) => 3,
            HarnessError::Core(LpdoError::Io(_) | LpdoError::Bundle(_) | LpdoError::Json(_)) => 3,
            HarnessError::Core(_) | HarnessError::Degenerate(_) | HarnessError::Invariant(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

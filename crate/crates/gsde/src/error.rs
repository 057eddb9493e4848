use std::path::PathBuf;

/// Errors of the file-backed layer.
#[derive(Debug, thiserror::Error)]
pub enum GsdeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gsde_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GsdeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Self::Parse { path: path.into(), line, message: message.into() }
    }

    /// Process exit code: 2 for usage and configuration problems, 3 for
    /// numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parse { .. } => 2,
            Self::Numeric(_) | Self::Core(gsde_core::Error::NonFinite { .. }) => 3,
            Self::Core(gsde_core::Error::Parameter(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = GsdeError> = std::result::Result<T, E>;

use std::path::{Path, PathBuf};

/// Failures surfaced by the command line, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad configuration, unknown names, unusable checkpoints. Exit 1.
    #[error("{0}")]
    Config(String),
    /// Missing or malformed input data. Exit 2.
    #[error("{0}")]
    Data(String),
    /// Non-finite loss or parameters, failed gradient check. Exit 3.
    #[error("{0}")]
    Numeric(String),
    #[error(transparent)]
    Checkpoint(#[from] crate::checkpoint::CheckpointError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Checkpoint(_) => 1,
            AppError::Data(_) | AppError::Io { .. } => 2,
            AppError::Numeric(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }
}

impl From<textcnn_core::Error> for AppError {
    fn from(e: textcnn_core::Error) -> Self {
        use textcnn_core::Error as E;
        match e {
            E::Numeric(_) | E::Harness(_) => AppError::Numeric(e.to_string()),
            E::Input(_) | E::Parse { .. } | E::Argument(_) => AppError::Data(e.to_string()),
            E::Config(_) | E::Format(_) | E::Dimension(_) => AppError::Config(e.to_string()),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

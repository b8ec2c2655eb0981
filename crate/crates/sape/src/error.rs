use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SapeError>;

#[derive(Debug, Error)]
pub enum SapeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: invalid UTF-8")]
    Utf8 { path: PathBuf, line: usize },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path} has {found} lines, expected {expected}")]
    LineCountMismatch { path: PathBuf, expected: usize, found: usize },
    #[error("config {path}:{line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },
    #[error("missing setting `{0}`")]
    MissingSetting(&'static str),
    #[error("model artifact missing: {0}")]
    MissingArtifact(PathBuf),
    #[error("checksum mismatch for {0}; the model directory is stale or was modified")]
    ChecksumMismatch(PathBuf),
    #[error("{stage} stage failed: {source}")]
    Stage { stage: &'static str, source: Box<SapeError> },
    #[error(transparent)]
    Core(#[from] sape_core::Error),
}

impl SapeError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        SapeError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        SapeError::Format { path: path.into(), line, message: message.into() }
    }

    /// Usage errors (bad configuration) exit with 1, data errors with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            SapeError::Config { .. } | SapeError::MissingSetting(_) => 1,
            SapeError::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<SapeError>> StageContext<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| SapeError::Stage { stage, source: Box::new(e.into()) })
    }
}

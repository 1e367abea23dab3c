use std::io;
use std::path::PathBuf;

use pivots_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, ToolError>;

impl ToolError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        ToolError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        ToolError::Format(msg.into())
    }

    /// Process exit status: 1 usage, 2 data or integrity, 3 resource guard.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Usage(_) => 1,
            ToolError::Core(e) => match e {
                CoreError::ResourceGuard { .. } | CoreError::Unsupported { .. } => 3,
                CoreError::Parse(_) | CoreError::Invalid(_) => 1,
                _ => 2,
            },
            ToolError::Io { .. } | ToolError::Format(_) => 2,
        }
    }
}

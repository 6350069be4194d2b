use std::path::PathBuf;

use metricscope_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} suite runs failed")]
    SuiteFailures { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 data, 4 numeric, 5 partial suite.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Numeric(_) => 4,
                CoreError::Parameter(_) => 2,
                _ => 3,
            },
            CliError::Io { .. } => 1,
            CliError::SuiteFailures { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

use std::path::{Path, PathBuf};

/// Failure of a subcommand, mapped to a process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub const EXIT_RUN: i32 = 1;
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_IO: i32 = 3;

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Core error raised while validating inputs.
    pub fn from_config(e: steplab::Error) -> Self {
        match e {
            steplab::Error::Io { path, source } => CliError::Io { path, source },
            other => CliError::Config(other.to_string()),
        }
    }

    /// Core error raised during computation.
    pub fn from_run(e: steplab::Error) -> Self {
        match e {
            steplab::Error::Io { path, source } => CliError::Io { path, source },
            other => CliError::Run(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Io { .. } => Self::EXIT_IO,
            CliError::Run(_) => Self::EXIT_RUN,
        }
    }
}

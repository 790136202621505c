use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A non-finite gradient or loss was produced at `step`.
    #[error("numerical divergence at step {step}")]
    Divergence { step: u64 },

    #[error("no equivalent learning rate found: {0}")]
    NoMatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure_len(name: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(invalid(format!(
            "{name} has length {got}, expected {expected}"
        )));
    }
    Ok(())
}

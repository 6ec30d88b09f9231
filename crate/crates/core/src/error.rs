use thiserror::Error;

/// Errors produced by the GP, filtering, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A symmetric positive-definite solve failed even after jitter retries.
    #[error("ill-conditioned matrix: {0}")]
    IllConditioned(String),

    /// The recent-observation buffer holds `tau` points and must be flushed
    /// before another observation can be pushed.
    #[error("recent buffer is full ({0} observations): call flush_recent before pushing")]
    BufferFull(usize),

    /// A text input (field CSV, report CSV, config file) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A configuration file or CLI flag problem.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn ill_conditioned(msg: impl Into<String>) -> Self {
        Error::IllConditioned(msg.into())
    }

    /// Process exit code for the CLI: 2 for configuration/input problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IllConditioned(_) | Error::BufferFull(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

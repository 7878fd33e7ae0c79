use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// The command line is inconsistent; nothing was done.
    Usage(String),
    /// Something failed while the command was running.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    /// Wraps a failure with the file it concerns.
    pub fn at(path: &Path, e: impl fmt::Display) -> Self {
        Self::Runtime(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Runtime(m) => f.write_str(m),
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::Runtime(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

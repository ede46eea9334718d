use std::path::PathBuf;

use thiserror::Error;

use crate::events::FormatError;
use crate::harness::config::ConfigError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid coverage: {0}")]
    Coverage(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("vanishing coincidence probability: survival = {0:e}")]
    VanishingCoincidence(f64),

    #[error("insufficient data: {count} coincidences, at least {needed} required")]
    InsufficientData { count: usize, needed: usize },

    #[error("config: {0}")]
    Config(#[from] ConfigError),

    #[error("event format: {0}")]
    Format(#[from] FormatError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error once context wrappers are peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 2 for configuration problems, 3 for numeric or coverage failures,
    /// 4 for I/O and event-format failures.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format(_) => 4,
            _ => 3,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: &str) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: &str) -> Result<T> {
        self.map_err(|e| e.context(context))
    }
}

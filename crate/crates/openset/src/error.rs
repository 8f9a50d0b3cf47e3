use std::path::PathBuf;

use crate::csv_io::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] openset_core::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for numeric
    /// failures, 4 for file and format problems.
    pub fn exit_code(&self) -> i32 {
        use openset_core::Error as E;
        match self {
            Error::Config { .. } => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } => 4,
            Error::Core(E::Invalid { .. } | E::Contract(_) | E::Shape { .. }) => 2,
            Error::Core(_) => 3,
        }
    }
}

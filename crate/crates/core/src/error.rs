use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based.
    #[error("{what} line {line}: {message}")]
    Format {
        what: String,
        line: usize,
        message: String,
    },

    /// Input that parsed but violates a data contract.
    #[error("invalid data: {0}")]
    Validation(String),

    #[error("treebank tree {index}: {message}")]
    InvalidTree { index: usize, message: String },

    #[error("least-squares design matrix is rank deficient (rank {rank} < {columns} columns)")]
    RankDeficient { rank: usize, columns: usize },

    /// Something that must not happen given valid inputs.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn format(what: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 3,
            _ => 2,
        }
    }
}

pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

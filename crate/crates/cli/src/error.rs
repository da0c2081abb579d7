use std::path::PathBuf;

use thiserror::Error;

/// CLI-level failures, each mapped to a stable process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: row {line} has {got} fields, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        line: usize,
        got: usize,
        expected: usize,
    },

    #[error("{path}: non-numeric cell at line {line}, column {column}: {cell:?}")]
    NonNumericCell {
        path: PathBuf,
        line: usize,
        column: usize,
        cell: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(#[source] pmclust_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse { .. }
            | CliError::RaggedRows { .. }
            | CliError::NonNumericCell { .. } => 3,
            CliError::Fit(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<pmclust_core::Error> for CliError {
    fn from(e: pmclust_core::Error) -> Self {
        match e {
            pmclust_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Fit(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

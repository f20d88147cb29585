use std::path::PathBuf;

use gar_core::GarError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: line {line}: expected {expected} fields, found {found}", .path.display())]
    RaggedRow { path: PathBuf, line: u64, expected: usize, found: usize },

    #[error("{}: line {line}, column {column} ({name}): cannot read {value:?} as a finite number", .path.display())]
    NonNumeric { path: PathBuf, line: u64, column: usize, name: String, value: String },

    #[error("{}: {message}", .path.display())]
    Csv { path: PathBuf, message: String },

    #[error("column {0} has zero variance and cannot be standardized")]
    ZeroVariance(String),

    #[error("{}: malformed report: {message}", .path.display())]
    Report { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] GarError),
}

impl CliError {
    /// 2 for bad configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(GarError::InvalidInput(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

use std::io;
use std::path::PathBuf;

use genbayes_core::Error as CoreError;
use thiserror::Error;

/// Process exit status.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{path}: row {row}, column `{column}`: {message}")]
    Cell { path: PathBuf, row: u64, column: String, message: String },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } | CliError::Cell { .. } => EXIT_VALIDATION,
            CliError::Core(e) if is_validation(e) => EXIT_VALIDATION,
            CliError::Core(_) | CliError::Io { .. } => EXIT_NUMERIC,
        }
    }
}

/// Errors caused by the inputs rather than by the numerics.
fn is_validation(e: &CoreError) -> bool {
    use CoreError::*;
    match e {
        AtDatum { source, .. } | Replication { source, .. } => is_validation(source),
        InvalidParameter(_)
        | ConstraintViolated { .. }
        | DimensionMismatch { .. }
        | ShapeMismatch { .. }
        | NonFiniteDatum
        | ModeUnavailable(_)
        | NotEnoughData { .. }
        | UnattainableCensoring(_)
        | NoEvents
        | ModelTooLarge { .. }
        | GridTooCoarse { .. }
        | PriorExcludesTarget { .. }
        | Unsupported(_) => true,
        _ => false,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {message}")]
    MissingInput { path: PathBuf, message: String },
    #[error("stage '{stage}' failed: {message}")]
    Stage { stage: String, message: String },
    #[error("{failed} of {total} scan points failed")]
    PartialScan { failed: usize, total: usize },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn stage(stage: &str, err: impl std::fmt::Display) -> Self {
        CliError::Stage { stage: stage.into(), message: err.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingInput { .. } => EXIT_CONFIG,
            CliError::Stage { .. } | CliError::Output { .. } => EXIT_STAGE,
            CliError::PartialScan { .. } => EXIT_PARTIAL,
        }
    }
}

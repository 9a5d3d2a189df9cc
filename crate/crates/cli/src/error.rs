use thiserror::Error;

/// Failures surfaced by the runner, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; exit status 1.
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// A pipeline stage failed after validation; exit status 2.
    #[error("{stage} failed: {message}")]
    Runtime { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime { .. } => 2,
        }
    }

    pub(crate) fn validation(msg: impl ToString) -> Self {
        CliError::Validation(msg.to_string())
    }

    pub(crate) fn runtime(stage: &'static str, msg: impl ToString) -> Self {
        CliError::Runtime {
            stage,
            message: msg.to_string(),
        }
    }
}

/// Tag an error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::runtime(stage, e))
    }
}

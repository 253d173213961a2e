use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cic_core::Error),
    #[error("every candidate model is degenerate")]
    AllDegenerate,
    #[error("output check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 2 for configuration errors, 3 for data errors, 4 when every model is
    /// degenerate, 1 for failed output checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 2,
            CliError::AllDegenerate => 4,
            CliError::Check(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

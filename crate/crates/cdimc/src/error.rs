use std::path::Path;

use cdimc_core::pipeline::PipelineError;
use cdimc_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data format error: {0}")]
    Format(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Process exit code: 2 config, 3 data format, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Format(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Other(format!("{}: {}", path.display(), err))
    }

    pub(crate) fn at(path: &Path, line: usize, msg: impl std::fmt::Display) -> Self {
        CliError::Format(format!("{}:{}: {}", path.display(), line, msg))
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::Config(m) | Error::Spec(m) => CliError::Config(m),
            Error::Data(m) | Error::Dimension(m) => CliError::Format(m),
            Error::Numeric(m) => CliError::Numeric(m),
            Error::Contract(m) => CliError::Other(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> Self {
        let stage = err.stage;
        match CliError::from(err.error) {
            CliError::Config(m) => CliError::Config(format!("{stage} stage: {m}")),
            CliError::Format(m) => CliError::Format(format!("{stage} stage: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{stage} stage: {m}")),
            CliError::Other(m) => CliError::Other(format!("{stage} stage: {m}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

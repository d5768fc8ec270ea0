use thiserror::Error;
use urbanscope::{BenchError, HarnessError, MapError, NavError, SwftError, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("endpoint: {0}")]
    Endpoint(String),
}

impl CliError {
    /// 1 usage or configuration, 2 data, 3 endpoint.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Endpoint(_) => 3,
        }
    }

    pub fn data(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {e}"))
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(MapError, SynthError, BenchError, NavError, SwftError);

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Transport(_)
            | HarnessError::Status { .. }
            | HarnessError::RetriesExhausted { .. }
            | HarnessError::MalformedResponse(_) => CliError::Endpoint(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

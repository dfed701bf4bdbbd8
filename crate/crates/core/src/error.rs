use alloc::string::String;

/// Errors surfaced by every fallible operation in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error("environment exhausted after {steps} of {horizon} steps")]
    EnvironmentExhausted { steps: usize, horizon: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid_input {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}

macro_rules! invalid_config {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidConfig(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid_config;
pub(crate) use invalid_input;

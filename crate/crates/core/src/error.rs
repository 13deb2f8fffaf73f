use thiserror::Error;

/// Library-wide error type. `Config` covers bad parameters, `Data` covers
/// malformed or insufficient input data, `Positivity` is the estimation
/// failure raised by the plug-in adjustment when a stratum lacks one of the
/// treatment arms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("positivity violation: no rows for both treatment levels in stratum {stratum}")]
    Positivity { stratum: String },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

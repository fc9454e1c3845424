use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] vortex_core::Error),
    #[error(transparent)]
    Dns(#[from] vortex_dns::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

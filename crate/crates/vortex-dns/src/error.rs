use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("CFL violation: dt = {dt:.4e} exceeds limit {limit:.4e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("snapshot format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] vortex_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Analysis and batch driver for vortex-interaction experiments.

pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod summary;

pub use error::{Error, Result};

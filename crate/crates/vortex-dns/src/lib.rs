//! Pseudospectral simulation of the 2D vorticity equation on a doubly periodic box,
//! started from superposed Lamb-Oseen vortices and carrying one passive component
//! per vortex.

pub mod error;
pub mod fft2;
pub mod field;
pub mod sampler;
pub mod snapshot;
pub mod solver;

pub use error::{Error, Result};
pub use field::{init_oseen_superposition, oseen_field_unchecked, DecompositionReport, VorticityField};
pub use sampler::BicubicSampler;
pub use solver::{step, Simulation};

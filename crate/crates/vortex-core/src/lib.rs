//! Numerical toolkit for interacting Lamb-Oseen vortices: closed-form kernels,
//! point-vortex dynamics, multipole expansions of the interaction residuum and
//! the linearized operators that produce the vortex deformation profiles.

pub mod error;
pub mod expansion;
pub mod fit;
pub mod grid;
pub mod kernels;
pub mod ode;
pub mod point_vortex;
pub mod profile_solver;

pub use error::{Error, Result};
pub use grid::{AzimuthalMode, RadialGrid, RadialProfile};
pub use kernels::{PlanarVector, Vec2};

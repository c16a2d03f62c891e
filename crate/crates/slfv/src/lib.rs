//! Spatial Lambda-Fleming-Viot process with selection: event-driven simulation
//! on a periodic grid, deterministic solvers for the limiting nonlocal
//! reaction-diffusion equations, and Monte Carlo diagnostics comparing the two.

pub mod error;
pub mod lattice;

pub use error::{Error, Result};
pub mod events;
pub mod scaling;
pub mod solvers;
pub mod diagnostics;
pub mod driftload;
pub mod experiment;

//! Discrete Riesz `s`-equilibrium measures and minimal-energy point
//! configurations on compact sets given by bi-Lipschitz chart atlases.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: chart atlases and quadrature clouds with Hausdorff weights;
//! - [`energy`]: kernels, energies, potentials, and the Fourier-side check;
//! - [`equilibrium`]: the simplex-constrained quadratic program for `mu^s`;
//! - [`configs`]: gradient descent for minimal discrete energy;
//! - [`analysis`]: normalized `d`-energy, densities, weak-star distances, and `s`-sweeps;
//! - [`validate`]: the property suite run by `riesz-lab validate`.

pub mod analysis;
pub mod configs;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod numeric;
pub mod validate;

pub use error::{Error, Result};

//! Riesz kernels, discrete and measure energies, potentials, and the
//! constants `c(s,d)` and `omega_d`.

mod config;
mod constants;
mod fourier;
mod kernel;
mod measure;

pub use config::{discrete_energy, discrete_energy_with, point_set_energy, Configuration};
pub use constants::{c_sd, hausdorff_factor, omega_d, uniform_cube_energy, unit_ball_volume};
pub use fourier::{fourier_energy, fourier_energy_with, FourierEnergy, FourierOptions, GridDensity};
pub use kernel::{riesz_kernel, Schedule};
pub use measure::{
    diagonal_entries, measure_energy, measure_energy_with, normalized_potential, potential, serialize_extended,
    DiagonalPolicy, DiscreteMeasure, EnergyReport,
};

pub(crate) use kernel::kernel_from_dist2;

//! Normalized `d`-energy and potential, order-two densities, weak-star
//! distances, and sweeps of the equilibrium problem as `s` increases to `d`.

mod bl;
mod functionals;
mod sweep;

pub use bl::{bl_distance, BlDictionary, DEFAULT_DICTIONARY_SIZE};
pub use functionals::{
    dimension_gate, extrapolate_normalized, layer_cake_potential, normalized_d_energy, normalized_d_energy_limit,
    normalized_d_potential, order_two_density, DimensionClass, Extrapolation, RadialProfile, RADIAL_NODES,
};
pub use sweep::{default_s_grid, sweep_cloud, sweep_s, SweepOptions, SweepResult, SweepRow};

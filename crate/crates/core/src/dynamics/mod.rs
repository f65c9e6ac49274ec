//! Master-equation dynamics for the site-resolved and collective models.

pub mod generator;
pub mod integrate;
pub mod reservoir;
pub mod steady;

pub use generator::{lindblad_rhs, lindblad_rhs_collective, lindblad_rhs_full, Generator};
pub use integrate::{evolve, evolve_to, rotate_z, uniform_times, EvolveOptions, Plateau, Trajectory};
pub use reservoir::{Mode, ModelSpec, SqueezedReservoir};
pub use steady::{steady_state_numeric, steady_state_numeric_with_info, SteadySolve};

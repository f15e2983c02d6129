//! Numerical Riemann map onto the unit disk and transport of problem data.

pub mod map;
pub mod potential;

pub use map::{compute_map, ConformalMap, Direction};
pub use potential::{transform_potential, transform_weight, FieldExtrema, FieldSign, PotentialField};

//! Independent oracles for tiny instances.

pub mod brute;
pub mod grid;
pub mod reference_lp;

pub use brute::{brute_force_decomposed, brute_force_optimum, brute_force_vertex_product, BruteForce};
pub use grid::{grid_pricing_oracle, GridOracle};

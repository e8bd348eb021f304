//! Occupancy mapping with Bayesian kernel inference.

mod grid;
mod kernel;
mod mapper;

pub use grid::*;
pub use kernel::*;
pub use mapper::*;

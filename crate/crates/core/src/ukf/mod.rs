//! Unscented Kalman filter over the 18-dimensional augmented state.

mod filter;
pub mod sigma;
mod state;

pub use filter::*;
pub use sigma::SigmaParams;
pub use state::*;

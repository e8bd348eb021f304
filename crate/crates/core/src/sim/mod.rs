//! Wave-tank simulator: carriage ground truth and synthetic sensor logs.

mod scenario;
mod sensors;
mod truth;

pub use scenario::*;
pub use sensors::*;
pub use truth::*;

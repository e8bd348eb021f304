//! Wave-aware dead reckoning and adaptive-kernel occupancy mapping for
//! near-surface underwater robots.
//!
//! The crate is split along the processing chain: [`sim`] produces sensor
//! logs, [`ukf`] estimates the trajectory, [`bki`] builds the occupancy map
//! and [`eval`] scores both against ground truth. [`pipeline`] wires them
//! together behind the on-disk formats in [`io`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bki;
pub mod config;
pub mod disturbance;
pub mod error;
pub mod eval;
pub mod geo;
pub mod io;
pub mod pipeline;
pub mod sample;
pub mod sim;
pub mod ukf;

pub use disturbance::{DisturbanceProfile, DisturbanceTable, Sensor, WaveCondition, WaveSchedule};
pub use error::{Error, Result};
pub use geo::{Gaussian, Pose, Twist};
pub use sample::{Measurement, SensorSample};
pub use ukf::{RobotState, StateBelief};

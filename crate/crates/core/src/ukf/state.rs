use nalgebra::{DMatrix, Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{is_valid_covariance, Pose, Twist};

pub const STATE_DIM: usize = 18;
pub const POS: usize = 0;
pub const ATT: usize = 3;
pub const LIN_VEL: usize = 6;
pub const ANG_VEL: usize = 9;
pub const BIAS_DR: usize = 12;
pub const BIAS_IMU: usize = 15;
/// State components that live on the circle.
pub const ANGLES: [usize; 3] = [ATT, ATT + 1, ATT + 2];

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Pose, body twist and the two gyro bias triples.
///
/// Packed order: `[x y z φ θ ψ | u v w p q r | b_dr | b_imu]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub pose: Pose,
    pub twist: Twist,
    /// Drift of the DVL dead-reckoning attitude.
    pub bias_dr: Vector3<f64>,
    /// Bias of the standalone IMU gyro.
    pub bias_imu: Vector3<f64>,
}

impl RobotState {
    pub fn to_vector(&self) -> StateVector {
        let mut v = StateVector::zeros();
        v.fixed_rows_mut::<6>(POS)
            .copy_from(&Vector6::from(self.pose.to_array()));
        v.fixed_rows_mut::<6>(LIN_VEL)
            .copy_from(&Vector6::from(self.twist.to_array()));
        v.fixed_rows_mut::<3>(BIAS_DR).copy_from(&self.bias_dr);
        v.fixed_rows_mut::<3>(BIAS_IMU).copy_from(&self.bias_imu);
        v
    }

    pub fn from_vector(v: &StateVector) -> Self {
        let six = |o: usize| [v[o], v[o + 1], v[o + 2], v[o + 3], v[o + 4], v[o + 5]];
        RobotState {
            pose: Pose::from_array(six(POS)),
            twist: Twist::from_array(six(LIN_VEL)),
            bias_dr: v.fixed_rows::<3>(BIAS_DR).into_owned(),
            bias_imu: v.fixed_rows::<3>(BIAS_IMU).into_owned(),
        }
    }
}

/// Filter posterior at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBelief {
    pub state: RobotState,
    pub cov: StateMatrix,
    /// seconds
    pub t: f64,
}

impl StateBelief {
    pub fn new(state: RobotState, cov: StateMatrix, t: f64) -> Result<Self> {
        let belief = StateBelief { state, cov, t };
        if !belief.is_consistent() {
            return Err(Error::Contract("belief covariance is not symmetric PSD".into()));
        }
        Ok(belief)
    }

    pub fn mean(&self) -> StateVector {
        self.state.to_vector()
    }

    /// Diagonal of the position block, m².
    pub fn position_variance(&self) -> Vector3<f64> {
        Vector3::new(self.cov[(0, 0)], self.cov[(1, 1)], self.cov[(2, 2)])
    }

    /// Symmetric and PSD within the tolerances used for every Gaussian.
    pub fn is_consistent(&self) -> bool {
        let d = DMatrix::from_iterator(STATE_DIM, STATE_DIM, self.cov.iter().copied());
        is_valid_covariance(&d) && self.state.pose.is_finite() && self.state.twist.is_finite()
    }
}

/// White acceleration noise plus random-walk bias models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise {
    /// Covariance of `[linear accel; angular accel]`.
    pub accel_cov: Matrix6<f64>,
    pub bias_walk_dr: Matrix3<f64>,
    pub bias_walk_imu: Matrix3<f64>,
    /// Mean bias drift rate, rad/s per second.
    pub bias_mean_dr: Vector3<f64>,
    pub bias_mean_imu: Vector3<f64>,
}

impl ProcessNoise {
    pub fn zero() -> Self {
        ProcessNoise {
            accel_cov: Matrix6::zeros(),
            bias_walk_dr: Matrix3::zeros(),
            bias_walk_imu: Matrix3::zeros(),
            bias_mean_dr: Vector3::zeros(),
            bias_mean_imu: Vector3::zeros(),
        }
    }

    /// Diagonal noise from standard deviations.
    pub fn from_std(
        lin_accel_std: [f64; 3],
        ang_accel_std: [f64; 3],
        bias_walk_dr_std: [f64; 3],
        bias_walk_imu_std: [f64; 3],
    ) -> Self {
        let sq = |a: [f64; 3]| Vector3::from(a).component_mul(&Vector3::from(a));
        let mut accel = Vector6::zeros();
        accel.fixed_rows_mut::<3>(0).copy_from(&sq(lin_accel_std));
        accel.fixed_rows_mut::<3>(3).copy_from(&sq(ang_accel_std));
        ProcessNoise {
            accel_cov: Matrix6::from_diagonal(&accel),
            bias_walk_dr: Matrix3::from_diagonal(&sq(bias_walk_dr_std)),
            bias_walk_imu: Matrix3::from_diagonal(&sq(bias_walk_imu_std)),
            bias_mean_dr: Vector3::zeros(),
            bias_mean_imu: Vector3::zeros(),
        }
    }

    /// Same noise with the bias states frozen.
    pub fn without_bias(mut self) -> Self {
        self.bias_walk_dr = Matrix3::zeros();
        self.bias_walk_imu = Matrix3::zeros();
        self.bias_mean_dr = Vector3::zeros();
        self.bias_mean_imu = Vector3::zeros();
        self
    }
}

/// Base (calm-water) measurement noise of each channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNoise {
    /// m
    pub barometer_std: f64,
    /// m/s
    pub dvl_std: [f64; 3],
    /// rad/s
    pub imu_std: [f64; 3],
    /// rad
    pub dr_std: [f64; 3],
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            barometer_std: 0.01,
            dvl_std: [0.005, 0.005, 0.003],
            imu_std: [0.002, 0.002, 0.002],
            dr_std: [0.002, 0.002, 0.002],
        }
    }
}

fn diag3(std: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(std).component_mul(&Vector3::from(std)))
}

impl SensorNoise {
    pub fn barometer_var(&self) -> f64 {
        self.barometer_std * self.barometer_std
    }
    pub fn dvl_cov(&self) -> Matrix3<f64> {
        diag3(self.dvl_std)
    }
    pub fn imu_cov(&self) -> Matrix3<f64> {
        diag3(self.imu_std)
    }
    pub fn dr_cov(&self) -> Matrix3<f64> {
        diag3(self.dr_std)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.barometer_std) {
            return Err(Error::config("sensors.noise.barometer_std", "must be > 0"));
        }
        for (key, arr) in [
            ("dvl_std", self.dvl_std),
            ("imu_std", self.imu_std),
            ("dr_std", self.dr_std),
        ] {
            if !arr.iter().all(|v| ok(*v)) {
                return Err(Error::config(format!("sensors.noise.{key}"), "entries must be > 0"));
            }
        }
        Ok(())
    }
}

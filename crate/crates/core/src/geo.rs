//! Rotations, angle wrapping, frame transforms and a Gaussian container.
//!
//! Frames: world is north-east-down (z grows with depth), body is
//! forward-right-down. Attitude uses intrinsic Z-Y-X Euler angles
//! (yaw, then pitch, then roll).

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch magnitudes above `π/2 - GIMBAL_MARGIN` are counted as near-gimbal.
pub const GIMBAL_MARGIN: f64 = 0.05;

static GIMBAL_PROXIMITY: AtomicU64 = AtomicU64::new(0);

/// Number of rotations built so far with pitch close to ±π/2.
pub fn gimbal_proximity_count() -> u64 {
    GIMBAL_PROXIMITY.load(Ordering::Relaxed)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r += TAU;
    }
    r.min(PI)
}

/// Body-to-world rotation for intrinsic Z-Y-X Euler angles.
pub fn euler_to_rotation(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    if pitch.abs() > FRAC_PI_2 - GIMBAL_MARGIN {
        GIMBAL_PROXIMITY.fetch_add(1, Ordering::Relaxed);
    }
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// World-frame pose: position in metres, attitude in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Pose {
    /// Builds a pose, wrapping the angles into `(-π, π]`.
    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Pose {
            x,
            y,
            z,
            roll: wrap_angle(roll),
            pitch: wrap_angle(pitch),
            yaw: wrap_angle(yaw),
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn euler(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        euler_to_rotation(self.roll, self.pitch, self.yaw)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Pose::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }
}

/// Body-frame twist: linear rates in m/s, angular rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Twist {
    pub fn linear(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    pub fn angular(&self) -> Vector3<f64> {
        Vector3::new(self.p, self.q, self.r)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.u, self.v, self.w, self.p, self.q, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Twist {
            u: a[0],
            v: a[1],
            w: a[2],
            p: a[3],
            q: a[4],
            r: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Rotates a body-frame vector into the world frame.
pub fn body_to_world(pose: &Pose, v_body: &Vector3<f64>) -> Vector3<f64> {
    pose.rotation() * v_body
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// True when `m` is symmetric to `1e-9` relative and PSD to `-1e-9·trace`.
pub fn is_valid_covariance(m: &DMatrix<f64>) -> bool {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-9 * scale {
        return false;
    }
    min_eigenvalue(m) >= -1e-9 * m.trace().abs().max(f64::MIN_POSITIVE)
}

/// Mean and covariance pair with validated shape, symmetry and PSD-ness.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Contract(format!(
                "covariance is {}x{} for a mean of length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("non-finite mean".into()));
        }
        if !is_valid_covariance(&cov) {
            return Err(Error::Contract(
                "covariance is not symmetric positive semi-definite".into(),
            ));
        }
        Ok(Gaussian { mean, cov })
    }

    /// Zero-mean Gaussian with a diagonal covariance built from standard deviations.
    pub fn from_std(std: &[f64]) -> Result<Self> {
        let var = DVector::from_iterator(std.len(), std.iter().map(|s| s * s));
        Gaussian::new(DVector::zeros(std.len()), DMatrix::from_diagonal(&var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

//! Independent reference implementations used only by the test suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use std::collections::HashMap;

/// Textbook Kalman update with the Joseph-form covariance.
pub fn linear_kf_update(
    x: &DVector<f64>,
    p: &DMatrix<f64>,
    h: &DMatrix<f64>,
    z: &DVector<f64>,
    r: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let s = h * p * h.transpose() + r;
    let k = p * h.transpose() * s.lu().try_inverse().expect("S invertible");
    let x_new = x + &k * (z - h * x);
    let n = x.len();
    let i_kh = DMatrix::identity(n, n) - &k * h;
    let p_new = &i_kh * p * i_kh.transpose() + &k * r * k.transpose();
    (x_new, p_new)
}

/// Random symmetric positive-definite matrix with entries of order `scale`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.05) * scale
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.min()
}

/// Rz(yaw) * Ry(pitch) * Rx(roll), written out by hand.
pub fn rotation(roll: f64, pitch: f64, yaw: f64) -> [[f64; 3]; 3] {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

pub fn rotate(r: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2];
    }
    out
}

/// Counting sensor model: each hit adds one to alpha of its cell.
pub fn csm_oracle(
    hits: &[[f64; 3]],
    origin: [f64; 3],
    pitch: f64,
    alpha0: f64,
    beta0: f64,
) -> HashMap<[i64; 3], (f64, f64)> {
    let mut cells = HashMap::new();
    for h in hits {
        let idx = [0, 1, 2].map(|j| ((h[j] - origin[j]) / pitch).floor() as i64);
        cells.entry(idx).or_insert((alpha0, beta0)).0 += 1.0;
    }
    cells
}

pub fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn to_arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

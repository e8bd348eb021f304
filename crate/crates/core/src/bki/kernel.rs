//! Sparse compact-support kernels and the variance-driven length scales.

use log::warn;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Unit-amplitude sparse kernel profile at `d / l`.
fn unit_profile(d: f64, l: f64) -> f64 {
    if d >= l {
        return 0.0;
    }
    let x = d / l;
    let v = (2.0 + (TAU * x).cos()) * (1.0 - x) / 3.0 + (TAU * x).sin() / TAU;
    v.max(0.0)
}

/// Sparse kernel of radius `l` and amplitude `sigma0`: `sigma0` at zero
/// distance, decaying smoothly to exactly zero at `d = l`.
pub fn sparse_kernel(d: f64, l: f64, sigma0: f64) -> f64 {
    sigma0 * unit_profile(d, l)
}

/// Axis-decomposed kernel: one unit profile per axis, scaled once by `sigma0`.
///
/// Support is the open box `|delta_j| < l_hat_j`.
pub fn decomposed_kernel(delta: &Vector3<f64>, l_hat: &Vector3<f64>, sigma0: f64) -> f64 {
    let mut k = sigma0;
    for j in 0..3 {
        let f = unit_profile(delta[j].abs(), l_hat[j]);
        if f == 0.0 {
            return 0.0;
        }
        k *= f;
    }
    k
}

/// How a hit spreads evidence to neighbouring cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape {
    /// Counting sensor model: weight one on the containing cell only.
    Counting,
    /// Isotropic ball of radius `l`.
    Radial { l: f64 },
    /// Axis-aligned box of half-extents `l_hat`.
    Decomposed { l_hat: Vector3<f64> },
}

impl KernelShape {
    /// Weight between cell centres separated by `delta`.
    pub fn weight(&self, delta: &Vector3<f64>, sigma0: f64) -> f64 {
        match self {
            KernelShape::Counting => {
                if delta.iter().all(|d| *d == 0.0) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelShape::Radial { l } => sparse_kernel(delta.norm(), *l, sigma0),
            KernelShape::Decomposed { l_hat } => decomposed_kernel(delta, l_hat, sigma0),
        }
    }

    /// Per-axis support half-extent, in metres.
    pub fn reach(&self) -> Vector3<f64> {
        match self {
            KernelShape::Counting => Vector3::zeros(),
            KernelShape::Radial { l } => Vector3::repeat(*l),
            KernelShape::Decomposed { l_hat } => *l_hat,
        }
    }
}

/// Mapping hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub sigma0_dvl: f64,
    pub sigma0_sonar: f64,
    pub l_min: [f64; 3],
    pub l_max: [f64; 3],
    pub alpha0: f64,
    pub beta0: f64,
    /// Cubic cell edge, metres.
    pub pitch: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            sigma0_dvl: 0.9,
            sigma0_sonar: 0.6,
            l_min: [0.10, 0.10, 0.05],
            l_max: [0.18, 0.18, 0.08],
            alpha0: 1e-10,
            beta0: 1e-10,
            pitch: 0.1,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("mapping.kernel.{k}");
        for (name, s) in [("sigma0_dvl", self.sigma0_dvl), ("sigma0_sonar", self.sigma0_sonar)] {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::config(key(name), "must lie in (0, 1]"));
            }
        }
        for j in 0..3 {
            if !(self.l_min[j] > 0.0 && self.l_min[j] <= self.l_max[j] && self.l_max[j].is_finite()) {
                return Err(Error::config(key("l_min"), "need 0 < l_min <= l_max per axis"));
            }
        }
        if !(self.alpha0 > 0.0 && self.beta0 > 0.0 && self.alpha0.is_finite() && self.beta0.is_finite()) {
            return Err(Error::config(key("alpha0"), "priors must be finite and > 0"));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(Error::config(key("pitch"), "must be > 0"));
        }
        Ok(())
    }

    pub fn l_min(&self) -> Vector3<f64> {
        Vector3::from(self.l_min)
    }

    pub fn l_max(&self) -> Vector3<f64> {
        Vector3::from(self.l_max)
    }
}

/// Interpolates per-axis length scales between `l_min` and `l_max` by the
/// normalised position variance. Out-of-range inputs are clamped.
pub fn adapt_lengthscale(var_norm: &Vector3<f64>, cfg: &KernelConfig) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for j in 0..3 {
        let mut v = var_norm[j];
        if !(0.0..=1.0).contains(&v) {
            warn!("normalised variance {v} on axis {j} clamped to [0, 1]");
            v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        out[j] = v * (cfg.l_max[j] - cfg.l_min[j]) + cfg.l_min[j];
    }
    out
}

/// Min-max normalises each axis of a variance series over the whole
/// session. An axis with no spread maps to zero everywhere.
pub fn normalize_session_variance(vars: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    if vars.is_empty() {
        return Vec::new();
    }
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in vars {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    vars.iter()
        .map(|v| {
            Vector3::from_fn(|j, _| {
                let span = hi[j] - lo[j];
                if span > 0.0 {
                    ((v[j] - lo[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Streaming variant: each step is normalised by the running extrema seen so far.
pub fn normalize_running_variance(vars: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    vars.iter()
        .map(|v| {
            lo = lo.inf(v);
            hi = hi.sup(v);
            Vector3::from_fn(|j, _| {
                let span = hi[j] - lo[j];
                if span > 0.0 {
                    (v[j] - lo[j]) / span
                } else {
                    0.0
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_closed_forms() {
        assert!((sparse_kernel(0.0, 0.3, 0.9) - 0.9).abs() < 1e-12);
        assert_eq!(sparse_kernel(0.3, 0.3, 0.9), 0.0);
        assert_eq!(sparse_kernel(0.5, 0.3, 0.9), 0.0);
        assert!((sparse_kernel(0.15, 0.3, 1.0) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn decomposed_examples() {
        let l = Vector3::new(0.18, 0.18, 0.08);
        assert!((decomposed_kernel(&Vector3::zeros(), &l, 0.9) - 0.9).abs() < 1e-15);
        assert_eq!(decomposed_kernel(&Vector3::new(0.0, 0.0, 0.08), &l, 0.9), 0.0);
        assert_eq!(decomposed_kernel(&Vector3::new(-0.2, 0.0, 0.0), &l, 0.9), 0.0);
        let half = decomposed_kernel(&Vector3::new(0.09, 0.0, 0.0), &l, 0.9);
        assert!((half - 0.9 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn lengthscale_examples() {
        let cfg = KernelConfig::default();
        let lo = adapt_lengthscale(&Vector3::zeros(), &cfg);
        assert!((lo - Vector3::new(0.10, 0.10, 0.05)).abs().max() < 1e-15);
        let hi = adapt_lengthscale(&Vector3::repeat(1.0), &cfg);
        assert!((hi - Vector3::new(0.18, 0.18, 0.08)).abs().max() < 1e-15);
        let mid = adapt_lengthscale(&Vector3::repeat(0.5), &cfg);
        assert!((mid - Vector3::new(0.14, 0.14, 0.065)).abs().max() < 1e-15);
        let clamped = adapt_lengthscale(&Vector3::new(-1.0, 2.0, 0.0), &cfg);
        assert!((clamped - Vector3::new(0.10, 0.18, 0.05)).abs().max() < 1e-15);
    }

    #[test]
    fn normalisation_examples() {
        let constant = vec![Vector3::repeat(0.3); 5];
        assert!(normalize_session_variance(&constant)
            .iter()
            .all(|v| *v == Vector3::zeros()));

        let growing: Vec<_> = (0..=10).map(|i| Vector3::repeat(1.0 + i as f64 / 10.0)).collect();
        let n = normalize_session_variance(&growing);
        assert_eq!(n[0], Vector3::zeros());
        assert_eq!(n[10], Vector3::repeat(1.0));
        assert!((n[5] - Vector3::repeat(0.5)).abs().max() < 1e-12);
        assert!(normalize_session_variance(&[]).is_empty());

        let running = normalize_running_variance(&growing);
        assert!(running.iter().skip(1).all(|v| *v == Vector3::repeat(1.0)));
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::default().validate().is_ok());
        let mut bad = KernelConfig::default();
        bad.l_min[2] = 0.5;
        assert!(bad.validate().is_err());
        let bad = KernelConfig {
            sigma0_sonar: 1.5,
            ..KernelConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn profile_is_monotone_on_fine_grid() {
        let l = 0.37;
        let mut prev = sparse_kernel(0.0, l, 0.6);
        let mut d = 1e-4;
        while d <= l {
            let k = sparse_kernel(d, l, 0.6);
            assert!(k <= prev + 1e-15);
            assert!((0.0..=0.6).contains(&k));
            prev = k;
            d += 1e-4;
        }
    }

    proptest! {
        #[test]
        fn radial_and_decomposed_agree_on_axes(d in 0.0..0.3f64, l in 0.05..0.25f64, axis in 0usize..3, s in 0.1..1.0f64) {
            let mut delta = Vector3::zeros();
            delta[axis] = d;
            let r = KernelShape::Radial { l }.weight(&delta, s);
            let b = KernelShape::Decomposed { l_hat: Vector3::repeat(l) }.weight(&delta, s);
            prop_assert!((r - b).abs() < 1e-15);
        }

        #[test]
        fn box_contains_ball(delta in prop::array::uniform3(-0.3..0.3f64), l in 0.05..0.25f64) {
            let delta = Vector3::from(delta);
            let ball = KernelShape::Radial { l }.weight(&delta, 1.0);
            let cube = KernelShape::Decomposed { l_hat: Vector3::repeat(l) }.weight(&delta, 1.0);
            prop_assert!(ball == 0.0 || cube > 0.0);
        }

        #[test]
        fn decomposed_in_range(delta in prop::array::uniform3(-0.3..0.3f64), l in prop::array::uniform3(0.05..0.25f64), s in 0.1..1.0f64) {
            let k = decomposed_kernel(&Vector3::from(delta), &Vector3::from(l), s);
            prop_assert!((0.0..=s).contains(&k));
        }
    }
}

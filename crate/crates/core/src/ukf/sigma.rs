//! Scaled unscented transform over fixed-size state vectors.
//!
//! Components listed in `angles` are treated as circular: residuals are
//! wrapped into `(-π, π]` and means use the weighted `atan2` of sines and
//! cosines.

use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::wrap_angle;

const JITTER_LEVELS: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Spread parameters of the scaled unscented transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for SigmaParams {
    fn default() -> Self {
        SigmaParams {
            alpha: 1e-1,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl SigmaParams {
    pub fn lambda(&self, n: usize) -> f64 {
        let n = n as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("estimator.sigma.alpha", "must lie in (0, 1]"));
        }
        if !self.beta.is_finite() || !self.kappa.is_finite() {
            return Err(Error::config("estimator.sigma", "beta and kappa must be finite"));
        }
        if n as f64 + self.lambda(n) <= 0.0 {
            return Err(Error::config("estimator.sigma.kappa", "n + lambda must be positive"));
        }
        Ok(())
    }

    /// Mean and covariance weights for `2n + 1` points.
    pub fn weights(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let lambda = self.lambda(n);
        let c = n as f64 + lambda;
        let wi = 0.5 / c;
        let mut wm = vec![wi; 2 * n + 1];
        let mut wc = vec![wi; 2 * n + 1];
        wm[0] = lambda / c;
        wc[0] = lambda / c + (1.0 - self.alpha * self.alpha + self.beta);
        (wm, wc)
    }
}

/// Sigma points with their mean and covariance weights.
#[derive(Debug, Clone)]
pub struct SigmaPoints<const N: usize> {
    pub points: Vec<SVector<f64, N>>,
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
}

/// `a - b` with circular components wrapped.
pub fn residual<const N: usize>(a: &SVector<f64, N>, b: &SVector<f64, N>, angles: &[usize]) -> SVector<f64, N> {
    let mut d = a - b;
    for &i in angles {
        d[i] = wrap_angle(d[i]);
    }
    d
}

/// Lower-triangular `L` with `L Lᵀ ≈ cov`.
///
/// Components with exactly zero variance get zero rows and columns, so a
/// degenerate covariance still yields exact points along those axes. The
/// remaining block is factored by Cholesky, retrying with diagonal jitter
/// from `1e-12` up to `1e-6` (relative to its largest variance).
pub fn psd_sqrt<const N: usize>(cov: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::CovarianceDegenerate("non-finite covariance".into()));
    }
    let active: Vec<usize> = (0..N).filter(|&i| cov[(i, i)] > 0.0).collect();
    let mut out = SMatrix::<f64, N, N>::zeros();
    if active.is_empty() {
        return Ok(out);
    }
    let k = active.len();
    let sub = DMatrix::from_fn(k, k, |r, c| {
        0.5 * (cov[(active[r], active[c])] + cov[(active[c], active[r])])
    });
    let scale = active.iter().map(|&i| cov[(i, i)]).fold(0.0, f64::max);

    let factor = std::iter::once(0.0)
        .chain(JITTER_LEVELS)
        .find_map(|jitter| {
            let mut m = sub.clone();
            for i in 0..k {
                m[(i, i)] += jitter * scale;
            }
            m.cholesky().map(|c| c.l())
        })
        .ok_or_else(|| Error::CovarianceDegenerate("Cholesky failed after jitter escalation".into()))?;

    for (r, &ir) in active.iter().enumerate() {
        for (c, &ic) in active.iter().enumerate() {
            out[(ir, ic)] = factor[(r, c)];
        }
    }
    Ok(out)
}

/// Generates the `2n + 1` scaled sigma points of `N(mean, cov)`.
pub fn generate_sigma_points<const N: usize>(
    mean: &SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
    params: &SigmaParams,
    angles: &[usize],
) -> Result<SigmaPoints<N>> {
    params.validate(N)?;
    let c = N as f64 + params.lambda(N);
    let l = psd_sqrt(&(cov * c))?;
    let mut points = Vec::with_capacity(2 * N + 1);
    points.push(*mean);
    for sign in [1.0, -1.0] {
        for j in 0..N {
            let mut p = mean + l.column(j) * sign;
            for &i in angles {
                p[i] = wrap_angle(p[i]);
            }
            points.push(p);
        }
    }
    let (wm, wc) = params.weights(N);
    Ok(SigmaPoints { points, wm, wc })
}

/// Weighted mean; circular components via `atan2(Σ w sin, Σ w cos)`.
///
/// Linear components are accumulated as offsets from the first point,
/// which keeps identical points exact.
pub fn weighted_mean<const N: usize>(points: &[SVector<f64, N>], wm: &[f64], angles: &[usize]) -> SVector<f64, N> {
    let anchor = points[0];
    let mut mean = anchor;
    for (p, w) in points.iter().zip(wm) {
        mean += (p - anchor) * *w;
    }
    for &i in angles {
        let (s, c) = points
            .iter()
            .zip(wm)
            .fold((0.0, 0.0), |(s, c), (p, w)| (s + w * p[i].sin(), c + w * p[i].cos()));
        mean[i] = if points.iter().all(|p| p[i] == anchor[i]) {
            anchor[i]
        } else {
            s.atan2(c)
        };
    }
    mean
}

/// Weighted outer-product sum of residuals about `mean`.
pub fn weighted_cov<const N: usize>(
    points: &[SVector<f64, N>],
    mean: &SVector<f64, N>,
    wc: &[f64],
    angles: &[usize],
) -> SMatrix<f64, N, N> {
    let mut cov = SMatrix::<f64, N, N>::zeros();
    for (p, w) in points.iter().zip(wc) {
        let d = residual(p, mean, angles);
        cov += d * d.transpose() * *w;
    }
    0.5 * (cov + cov.transpose())
}

/// Pushes sigma points through `f` and recovers the output mean and covariance.
pub fn unscented_transform<const N: usize, const M: usize>(
    sigma: &SigmaPoints<N>,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    out_angles: &[usize],
) -> (SVector<f64, M>, SMatrix<f64, M, M>) {
    let ys: Vec<_> = sigma.points.iter().map(&f).collect();
    let mean = weighted_mean(&ys, &sigma.wm, out_angles);
    let cov = weighted_cov(&ys, &mean, &sigma.wc, out_angles);
    (mean, cov)
}

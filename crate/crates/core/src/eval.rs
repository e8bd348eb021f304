//! Trajectory and map scoring against ground truth.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Vector3;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geo::{wrap_angle, Pose};
use crate::ukf::StateBelief;

/// Default smoothing window for derived velocities, s.
pub const VELOCITY_WINDOW: f64 = 0.5;

pub const COMPONENTS: [&str; 9] = ["x", "y", "z", "phi", "theta", "psi", "u", "v", "w"];

/// Velocity by central differences, then a centred moving average of
/// `window` seconds. The average shrinks symmetrically near the ends.
pub fn gt_velocity(positions: &[(f64, Vector3<f64>)], window: f64) -> Result<Vec<(f64, Vector3<f64>)>> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::Data(format!("need at least 3 positions, got {n}")));
    }
    let dt = (positions[n - 1].0 - positions[0].0) / (n - 1) as f64;
    if !(dt > 0.0)
        || positions
            .windows(2)
            .any(|w| ((w[1].0 - w[0].0) - dt).abs() > 1e-6 * dt.max(1e-3))
    {
        return Err(Error::Data("positions must be uniformly sampled".into()));
    }
    let samples = (window / dt).round() as usize;
    if samples < 2 {
        return Err(Error::Data(format!("window {window} s spans fewer than 2 samples")));
    }
    let half = samples / 2;

    let mut diff = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        diff.push((positions[b].1 - positions[a].1) / (positions[b].0 - positions[a].0));
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Vector3::zeros());
    for d in &diff {
        prefix.push(prefix.last().unwrap() + d);
    }
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let sum = prefix[i + h + 1] - prefix[i - h];
            (positions[i].0, sum / (2 * h + 1) as f64)
        })
        .collect())
}

/// One truth record: pose plus body-frame linear velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub t: f64,
    pub pose: Pose,
    pub vel_body: Vector3<f64>,
}

/// Replaces the velocities of a uniformly sampled truth series with ones
/// derived from its positions, rotated into the body frame.
pub fn derive_body_velocity(records: &[TruthRecord], window: f64) -> Result<Vec<TruthRecord>> {
    let pos: Vec<_> = records.iter().map(|r| (r.t, r.pose.position())).collect();
    let vel = gt_velocity(&pos, window)?;
    Ok(records
        .iter()
        .zip(vel)
        .map(|(r, (_, v))| TruthRecord {
            vel_body: r.pose.rotation().transpose() * v,
            ..*r
        })
        .collect())
}

fn as_components(pose: &Pose, vel: &Vector3<f64>) -> [f64; 9] {
    let p = pose.to_array();
    [p[0], p[1], p[2], p[3], p[4], p[5], vel.x, vel.y, vel.z]
}

fn interpolate(truth: &[TruthRecord], t: f64) -> Option<[f64; 9]> {
    let first = truth.first()?;
    let last = truth.last()?;
    if t < first.t || t > last.t {
        return None;
    }
    let i = truth.partition_point(|r| r.t <= t);
    if i == 0 || i >= truth.len() {
        let r = if i == 0 { first } else { last };
        return Some(as_components(&r.pose, &r.vel_body));
    }
    let (a, b) = (&truth[i - 1], &truth[i]);
    let s = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
    let ca = as_components(&a.pose, &a.vel_body);
    let cb = as_components(&b.pose, &b.vel_body);
    let mut out = [0.0; 9];
    for j in 0..9 {
        out[j] = if (3..6).contains(&j) {
            wrap_angle(ca[j] + s * wrap_angle(cb[j] - ca[j]))
        } else {
            ca[j] + s * (cb[j] - ca[j])
        };
    }
    Some(out)
}

/// Per-component RMSE of the estimates against interpolated truth, over
/// the estimates that fall inside the truth time span.
pub fn trajectory_rmse(estimates: &[StateBelief], truth: &[TruthRecord]) -> Result<[f64; 9]> {
    if truth.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Data("truth timestamps not sorted".into()));
    }
    let mut sum = [0.0; 9];
    let mut count = 0usize;
    for b in estimates {
        let Some(tr) = interpolate(truth, b.t) else { continue };
        let est = as_components(&b.state.pose, &b.state.twist.linear());
        for j in 0..9 {
            let mut r = est[j] - tr[j];
            if (3..6).contains(&j) {
                r = wrap_angle(r);
            }
            sum[j] += r * r;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Data("estimates and truth do not overlap in time".into()));
    }
    Ok(sum.map(|s| (s / count as f64).sqrt()))
}

/// Mean distance from each map point to its nearest truth point.
pub fn cloud_to_cloud(map: &[Vector3<f64>], truth: &[Vector3<f64>]) -> Result<f64> {
    if map.is_empty() || truth.is_empty() {
        return Err(Error::Data("cloud-to-cloud needs two non-empty clouds".into()));
    }
    let pts: Vec<[f64; 3]> = truth.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&pts);
    let total: f64 = map
        .iter()
        .map(|p| tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance.sqrt())
        .sum();
    Ok(total / map.len() as f64)
}

pub fn occupied_count(grid: &crate::bki::VoxelGrid) -> usize {
    grid.occupied_count()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rmse: Option<[f64; 9]>,
    pub cloud_to_cloud: Option<f64>,
    pub occupied_cells: Option<usize>,
    /// wall-clock seconds; shown on the console only so report files stay reproducible
    pub runtime: f64,
}

impl EvalReport {
    /// Flat `key value` text.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.rmse {
            for (name, v) in COMPONENTS.iter().zip(r) {
                let _ = writeln!(s, "rmse_{name} {v:.9e}");
            }
        }
        if let Some(c) = self.cloud_to_cloud {
            let _ = writeln!(s, "cloud_to_cloud {c:.9e}");
        }
        if let Some(n) = self.occupied_cells {
            let _ = writeln!(s, "occupied_cells {n}");
        }
        s
    }

    /// Aligned console table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.rmse {
            let _ = writeln!(s, "RMSE");
            let _ = writeln!(
                s,
                "{}",
                COMPONENTS.iter().map(|c| format!("{c:>9}")).collect::<String>()
            );
            let _ = writeln!(s, "{}", r.iter().map(|v| format!("{v:>9.4}")).collect::<String>());
        }
        if self.cloud_to_cloud.is_some() || self.occupied_cells.is_some() {
            let _ = writeln!(s, "{:>14} {:>14}", "occupied", "c2c [m]");
            let n = self.occupied_cells.map_or("-".to_string(), |n| n.to_string());
            let c = self.cloud_to_cloud.map_or("-".to_string(), |c| format!("{c:.4}"));
            let _ = writeln!(s, "{n:>14} {c:>14}");
        }
        let _ = writeln!(s, "runtime {:.2} s", self.runtime);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Twist;
    use crate::ukf::{RobotState, StateMatrix};
    use std::f64::consts::TAU;

    fn series(n: usize, dt: f64, f: impl Fn(f64) -> Vector3<f64>) -> Vec<(f64, Vector3<f64>)> {
        (0..n).map(|i| (i as f64 * dt, f(i as f64 * dt))).collect()
    }

    fn belief(t: f64, pose: Pose, vel: Vector3<f64>) -> StateBelief {
        let twist = Twist {
            u: vel.x,
            v: vel.y,
            w: vel.z,
            ..Twist::default()
        };
        StateBelief {
            state: RobotState {
                pose,
                twist,
                ..RobotState::default()
            },
            cov: StateMatrix::zeros(),
            t,
        }
    }

    #[test]
    fn velocity_of_constant_and_ramp() {
        let still = gt_velocity(&series(100, 0.01, |_| Vector3::new(1.0, 2.0, 3.0)), 0.5).unwrap();
        assert!(still.iter().all(|(_, v)| *v == Vector3::zeros()));
        let ramp = gt_velocity(&series(2000, 0.0005, |t| Vector3::new(0.2 * t, -0.1 * t, 0.0)), 0.5).unwrap();
        for (_, v) in &ramp {
            assert!((v.x - 0.2).abs() < 1e-9 && (v.y + 0.1).abs() < 1e-9);
        }
        assert!(gt_velocity(&series(2, 0.01, |_| Vector3::zeros()), 0.5).is_err());
        assert!(gt_velocity(&series(50, 0.01, |_| Vector3::zeros()), 0.001).is_err());
    }

    #[test]
    fn sinusoid_attenuation() {
        let (dt, f, w) = (0.0005, 1.0, 0.5);
        let om = TAU * f;
        let pos = series(8000, dt, |t| Vector3::new((om * t).sin(), 0.0, 0.0));
        let vel = gt_velocity(&pos, w).unwrap();
        let n = (w / dt).round() as usize;
        let m = (2 * (n / 2) + 1) as f64;
        // central difference gain times the boxcar gain
        let gain = (om * dt).sin() / (om * dt) * (m * om * dt / 2.0).sin() / (m * (om * dt / 2.0).sin());
        let peak = vel[1000..7000].iter().map(|(_, v)| v.x.abs()).fold(0.0, f64::max);
        assert!(
            (peak - om * gain).abs() < 0.01 * om * gain.abs(),
            "{peak} {}",
            om * gain
        );
    }

    #[test]
    fn rmse_examples() {
        let truth: Vec<_> = (0..=10)
            .map(|i| TruthRecord {
                t: i as f64,
                pose: Pose::new(i as f64, 0.0, 1.0, 0.0, 0.0, 3.1),
                vel_body: Vector3::new(1.0, 0.0, 0.0),
            })
            .collect();
        let same: Vec<_> = truth
            .iter()
            .map(|r| {
                belief(
                    r.t + 0.5,
                    Pose {
                        x: r.pose.x + 0.5,
                        ..r.pose
                    },
                    r.vel_body,
                )
            })
            .collect();
        let r = trajectory_rmse(&same[..10], &truth).unwrap();
        assert!(r.iter().all(|v| *v < 1e-12), "{r:?}");

        let shifted: Vec<_> = truth
            .iter()
            .map(|r| {
                belief(
                    r.t,
                    Pose {
                        y: 0.1,
                        yaw: -3.1,
                        ..r.pose
                    },
                    r.vel_body,
                )
            })
            .collect();
        let r = trajectory_rmse(&shifted, &truth).unwrap();
        assert!((r[1] - 0.1).abs() < 1e-12);
        assert!((r[5] - (TAU - 6.2)).abs() < 1e-9);
        assert!((r[5] - 0.083).abs() < 1e-3);

        let late = vec![belief(20.0, Pose::default(), Vector3::zeros())];
        assert!(trajectory_rmse(&late, &truth).is_err());
    }

    #[test]
    fn cloud_distance_examples() {
        let plane: Vec<_> = (0..50)
            .flat_map(|i| (0..50).map(move |j| Vector3::new(i as f64 * 0.01, j as f64 * 0.01, 1.0)))
            .collect();
        assert_eq!(cloud_to_cloud(&plane, &plane).unwrap(), 0.0);
        let up: Vec<_> = plane.iter().map(|p| p + Vector3::new(0.0, 0.0, 0.05)).collect();
        assert!((cloud_to_cloud(&up, &plane).unwrap() - 0.05).abs() < 1e-12);
        let d = cloud_to_cloud(&[Vector3::new(1.0, 0.0, 0.0)], &[Vector3::zeros()]).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!(cloud_to_cloud(&[], &plane).is_err());
    }

    #[test]
    fn report_layout() {
        let rep = EvalReport {
            rmse: Some([0.0; 9]),
            cloud_to_cloud: Some(0.1),
            occupied_cells: Some(3),
            runtime: 1.0,
        };
        let kv = rep.to_kv();
        assert_eq!(kv.lines().count(), 11);
        assert!(kv.contains("rmse_psi ") && kv.contains("occupied_cells 3"));
        assert!(!kv.contains("runtime"));
        assert!(rep.table().contains("c2c"));
    }
}

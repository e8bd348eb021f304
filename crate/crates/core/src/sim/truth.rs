//! Analytic carriage motion.

use nalgebra::{Matrix3, Vector3};

use super::scenario::PathSpec;
use crate::error::{Error, Result};
use crate::geo::{euler_to_rotation, Pose, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Still,
    Accel,
    Cruise,
    Decel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    t0: f64,
    from: Vector3<f64>,
    dir: Vector3<f64>,
    /// peak speed actually reached
    v: f64,
    a: f64,
    t_ramp: f64,
    t_cruise: f64,
}

impl Segment {
    fn duration(&self) -> f64 {
        2.0 * self.t_ramp + self.t_cruise
    }

    /// distance, speed and phase at local time `tau`
    fn at(&self, tau: f64) -> (f64, f64, Phase) {
        let (tr, tc, a, v) = (self.t_ramp, self.t_cruise, self.a, self.v);
        let ramp_len = 0.5 * a * tr * tr;
        if tau < tr {
            (0.5 * a * tau * tau, a * tau, Phase::Accel)
        } else if tau < tr + tc {
            (ramp_len + v * (tau - tr), v, Phase::Cruise)
        } else {
            let td = (tau - tr - tc).min(tr);
            (
                ramp_len + v * tc + v * td - 0.5 * a * td * td,
                (v - a * td).max(0.0),
                Phase::Decel,
            )
        }
    }
}

/// Exact state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthState {
    pub t: f64,
    pub pose: Pose,
    pub twist: Twist,
    pub phase: Phase,
}

/// Piecewise trapezoidal carriage motion, queryable at any time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start: Vector3<f64>,
    end: Vector3<f64>,
    attitude: Vector3<f64>,
    rot: Matrix3<f64>,
    settle: f64,
    segments: Vec<Segment>,
    duration: f64,
}

impl Trajectory {
    pub fn new(spec: &PathSpec) -> Result<Self> {
        if !(spec.speed > 0.0 && spec.speed.is_finite()) {
            return Err(Error::config("scenario.path.speed", "must be > 0"));
        }
        if !(spec.accel > 0.0 && spec.accel.is_finite()) {
            return Err(Error::config("scenario.path.accel", "must be > 0"));
        }
        if !(spec.settle >= 0.0) {
            return Err(Error::config("scenario.path.settle", "must be >= 0"));
        }
        let mut t = spec.settle;
        let mut prev = Vector3::from(spec.start);
        let mut segments = Vec::new();
        for w in &spec.waypoints {
            let to = Vector3::from(*w);
            let len = (to - prev).norm();
            if len > 0.0 {
                let a = spec.accel;
                // triangular profile when the segment is too short to reach cruise
                let v = spec.speed.min((len * a).sqrt());
                let t_ramp = v / a;
                let t_cruise = ((len - v * v / a) / v).max(0.0);
                let seg = Segment {
                    t0: t,
                    from: prev,
                    dir: (to - prev) / len,
                    v,
                    a,
                    t_ramp,
                    t_cruise,
                };
                t += seg.duration();
                segments.push(seg);
            }
            prev = to;
        }
        let attitude = Vector3::from(spec.attitude);
        Ok(Trajectory {
            start: Vector3::from(spec.start),
            end: prev,
            attitude,
            rot: euler_to_rotation(attitude.x, attitude.y, attitude.z),
            settle: spec.settle,
            duration: t + spec.settle,
            segments,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// World position, world velocity and phase.
    pub fn kinematics(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Phase) {
        if self.segments.is_empty() || t < self.settle {
            return (self.start, Vector3::zeros(), Phase::Still);
        }
        for seg in &self.segments {
            let tau = t - seg.t0;
            if tau < seg.duration() {
                let (s, v, phase) = seg.at(tau);
                return (seg.from + seg.dir * s, seg.dir * v, phase);
            }
        }
        (self.end, Vector3::zeros(), Phase::Still)
    }

    pub fn state_at(&self, t: f64) -> TruthState {
        let (p, v, phase) = self.kinematics(t);
        let body = self.rot.transpose() * v;
        TruthState {
            t,
            pose: Pose::new(p.x, p.y, p.z, self.attitude.x, self.attitude.y, self.attitude.z),
            twist: Twist {
                u: body.x,
                v: body.y,
                w: body.z,
                p: 0.0,
                q: 0.0,
                r: 0.0,
            },
            phase,
        }
    }
}

/// High-rate ground truth plus the analytic trajectory behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLog {
    pub trajectory: Trajectory,
    pub rate: f64,
    /// (t, world position) at `rate`
    pub positions: Vec<(f64, Vector3<f64>)>,
}

impl GroundTruthLog {
    pub fn states_at(&self, times: &[f64]) -> Vec<TruthState> {
        times.iter().map(|t| self.trajectory.state_at(*t)).collect()
    }

    /// Full states on the high-rate clock.
    pub fn states(&self) -> Vec<TruthState> {
        self.positions
            .iter()
            .map(|(t, _)| self.trajectory.state_at(*t))
            .collect()
    }
}

/// Sample times `0, 1/rate, ...` up to and including `duration`.
pub fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 / rate).collect()
}

pub fn generate_truth(path: &PathSpec, rate: f64) -> Result<GroundTruthLog> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::config("scenario.rates.truth", "must be > 0"));
    }
    let trajectory = Trajectory::new(path)?;
    let positions = sample_times(trajectory.duration(), rate)
        .into_iter()
        .map(|t| (t, trajectory.kinematics(t).0))
        .collect();
    Ok(GroundTruthLog {
        trajectory,
        rate,
        positions,
    })
}

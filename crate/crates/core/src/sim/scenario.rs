//! Scenario description for the wave-tank simulator.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::disturbance::{WaveInterval, WaveSchedule, DEFAULT_DR_ORIENT_STD};
use crate::error::{Error, Result};

/// Carriage path: straight segments between waypoints, each driven from
/// rest to rest with a trapezoidal speed profile. Attitude is held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub start: [f64; 3],
    pub waypoints: Vec<[f64; 3]>,
    /// cruise speed, m/s
    pub speed: f64,
    /// ramp acceleration, m/s²
    pub accel: f64,
    /// roll, pitch, yaw held for the whole run, rad
    pub attitude: [f64; 3],
    /// stationary time before the first and after the last segment, s
    pub settle: f64,
}

impl PathSpec {
    /// Straight run of `length` metres along world x.
    pub fn straight(length: f64, speed: f64) -> Self {
        PathSpec {
            start: [0.0, 0.0, 0.5],
            waypoints: vec![[length, 0.0, 0.5]],
            speed,
            accel: 0.1,
            attitude: [0.0; 3],
            settle: 2.0,
        }
    }

    pub fn length(&self) -> f64 {
        let mut prev = Vector3::from(self.start);
        let mut total = 0.0;
        for w in &self.waypoints {
            let w = Vector3::from(*w);
            total += (w - prev).norm();
            prev = w;
        }
        total
    }
}

/// Axis-aligned box resting in the tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxObstacle {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Flat floor at depth `depth` (z positive down) plus box obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorSpec {
    pub depth: f64,
    #[serde(default)]
    pub obstacles: Vec<BoxObstacle>,
}

impl FloorSpec {
    /// Dense samples of the visible scene surface over an x-y window:
    /// the floor outside obstacle footprints, then each box's top and sides.
    pub fn surface_points(&self, x: (f64, f64), y: (f64, f64), spacing: f64) -> Vec<Vector3<f64>> {
        let steps = |lo: f64, hi: f64| -> Vec<f64> {
            let n = ((hi - lo) / spacing).floor().max(0.0) as usize;
            (0..=n).map(|i| lo + i as f64 * spacing).collect()
        };
        let covered = |px: f64, py: f64| {
            self.obstacles
                .iter()
                .any(|b| px >= b.min[0] && px <= b.max[0] && py >= b.min[1] && py <= b.max[1])
        };
        let mut pts = Vec::new();
        for px in steps(x.0, x.1) {
            for py in steps(y.0, y.1) {
                if !covered(px, py) {
                    pts.push(Vector3::new(px, py, self.depth));
                }
            }
        }
        for b in &self.obstacles {
            let top = b.min[2];
            for px in steps(b.min[0], b.max[0]) {
                for py in steps(b.min[1], b.max[1]) {
                    pts.push(Vector3::new(px, py, top));
                }
            }
            let bottom = b.max[2].min(self.depth);
            for pz in steps(top, bottom) {
                for px in steps(b.min[0], b.max[0]) {
                    pts.push(Vector3::new(px, b.min[1], pz));
                    pts.push(Vector3::new(px, b.max[1], pz));
                }
                for py in steps(b.min[1], b.max[1]) {
                    pts.push(Vector3::new(b.min[0], py, pz));
                    pts.push(Vector3::new(b.max[0], py, pz));
                }
            }
        }
        pts
    }
}

/// Sample rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorRates {
    pub dvl: f64,
    pub imu: f64,
    pub barometer: f64,
    pub dr: f64,
    pub sonar: f64,
    pub truth: f64,
}

impl Default for SensorRates {
    fn default() -> Self {
        SensorRates {
            dvl: 5.0,
            imu: 50.0,
            barometer: 10.0,
            dr: 5.0,
            sonar: 10.0,
            truth: 2000.0,
        }
    }
}

/// Noise and bias injected by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimNoise {
    pub barometer_std: f64,
    pub dvl_std: [f64; 3],
    pub imu_std: [f64; 3],
    pub dr_std: [f64; 3],
    pub range_std: f64,
    /// extra DR attitude noise while waves are running
    pub dr_wave_std: [f64; 3],
    /// DR attitude drift, rad/s
    pub dr_drift_rate: [f64; 3],
    /// constant gyro bias, rad/s
    pub imu_bias: [f64; 3],
    /// depth/range oscillation amplitude as a fraction of wave amplitude
    pub wave_coupling: f64,
}

impl Default for SimNoise {
    fn default() -> Self {
        SimNoise {
            barometer_std: 0.005,
            dvl_std: [0.003, 0.003, 0.002],
            imu_std: [0.001; 3],
            dr_std: [0.001; 3],
            range_std: 0.005,
            dr_wave_std: DEFAULT_DR_ORIENT_STD,
            dr_drift_rate: [0.0, 0.0, 1e-4],
            imu_bias: [0.0; 3],
            wave_coupling: 0.5,
        }
    }
}

impl SimNoise {
    /// Every noise source, drift and wave coupling switched off.
    pub fn noiseless() -> Self {
        SimNoise {
            barometer_std: 0.0,
            dvl_std: [0.0; 3],
            imu_std: [0.0; 3],
            dr_std: [0.0; 3],
            range_std: 0.0,
            dr_wave_std: [0.0; 3],
            dr_drift_rate: [0.0; 3],
            imu_bias: [0.0; 3],
            wave_coupling: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub path: PathSpec,
    pub floor: FloorSpec,
    #[serde(default)]
    pub waves: WaveSchedule,
    #[serde(default)]
    pub rates: SensorRates,
    #[serde(default)]
    pub noise: SimNoise,
    #[serde(default)]
    pub dvl_offset: Option<DvlOffset>,
    /// set from the run configuration
    #[serde(skip)]
    pub seed: u64,
}

/// Constant DVL velocity fault.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvlOffset {
    pub offset: [f64; 3],
    pub cruise_only: bool,
}

impl Default for Scenario {
    /// 36.6 m straight tank run with wave intervals cycling through the
    /// characterised conditions every 30 s, calm water at either end.
    fn default() -> Self {
        let rows = [(0.1, 1.0), (0.1, 0.75), (0.05, 0.75)];
        let intervals = (0..5)
            .map(|i| {
                let (amplitude, frequency) = rows[i % 3];
                WaveInterval {
                    t_start: 20.0 + 30.0 * i as f64,
                    t_end: 50.0 + 30.0 * i as f64,
                    amplitude,
                    frequency,
                }
            })
            .collect();
        Scenario {
            path: PathSpec::straight(36.6, 0.2),
            floor: FloorSpec {
                depth: 1.52,
                obstacles: Vec::new(),
            },
            waves: WaveSchedule { intervals },
            rates: SensorRates::default(),
            noise: SimNoise::default(),
            dvl_offset: None,
            seed: 7,
        }
    }
}

fn nonneg(key: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::config(key, "must be finite and >= 0"));
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let p = &self.path;
        if !(p.speed > 0.0 && p.speed.is_finite()) {
            return Err(Error::config("scenario.path.speed", "must be > 0"));
        }
        if !(p.accel > 0.0 && p.accel.is_finite()) {
            return Err(Error::config("scenario.path.accel", "must be > 0"));
        }
        nonneg("scenario.path.settle", &[p.settle])?;
        if p.start
            .iter()
            .chain(p.waypoints.iter().flatten())
            .chain(&p.attitude)
            .any(|v| !v.is_finite())
        {
            return Err(Error::config("scenario.path", "coordinates must be finite"));
        }
        if !self.floor.depth.is_finite() {
            return Err(Error::config("scenario.floor.depth", "must be finite"));
        }
        for (i, b) in self.floor.obstacles.iter().enumerate() {
            if (0..3).any(|j| !(b.min[j] < b.max[j])) {
                return Err(Error::config(
                    format!("scenario.floor.obstacles[{i}]"),
                    "need min < max",
                ));
            }
        }
        let r = &self.rates;
        for (k, v) in [
            ("dvl", r.dvl),
            ("imu", r.imu),
            ("barometer", r.barometer),
            ("dr", r.dr),
            ("sonar", r.sonar),
            ("truth", r.truth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("scenario.rates.{k}"), "must be > 0"));
            }
        }
        self.waves.validate()?;
        let n = &self.noise;
        nonneg("scenario.noise.barometer_std", &[n.barometer_std, n.range_std])?;
        nonneg("scenario.noise.dvl_std", &n.dvl_std)?;
        nonneg("scenario.noise.imu_std", &n.imu_std)?;
        nonneg("scenario.noise.dr_std", &n.dr_std)?;
        nonneg("scenario.noise.dr_wave_std", &n.dr_wave_std)?;
        nonneg("scenario.noise.wave_coupling", &[n.wave_coupling])?;
        if n.dr_drift_rate.iter().chain(&n.imu_bias).any(|v| !v.is_finite()) {
            return Err(Error::config("scenario.noise.dr_drift_rate", "must be finite"));
        }
        Ok(())
    }
}

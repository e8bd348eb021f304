//! Wave conditions and the additive acoustic noise they induce.
//!
//! Waves do not change the measurement models, they widen them: the extra
//! zero-mean noise enters the filter as additional diagonal measurement
//! variance for the DVL velocity and DR orientation channels. The barometer
//! and gyro channels are left alone.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default DR orientation disturbance under waves, in radians. Not a measured value.
pub const DEFAULT_DR_ORIENT_STD: [f64; 3] = [0.005, 0.005, 0.01];

const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveCondition {
    /// metres
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
}

impl WaveCondition {
    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::config("amplitude", "must be finite and >= 0"));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::config("frequency", "must be finite and > 0"));
        }
        Ok(WaveCondition { amplitude, frequency })
    }

    pub fn is_calm(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// Standard deviations of the wave-induced noise on each acoustic channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceProfile {
    /// m/s, for u, v, w
    pub dvl_vel_std: [f64; 3],
    /// rad, for roll, pitch, yaw
    pub dr_orient_std: [f64; 3],
}

impl DisturbanceProfile {
    pub const CALM: DisturbanceProfile = DisturbanceProfile {
        dvl_vel_std: [0.0; 3],
        dr_orient_std: [0.0; 3],
    };

    pub fn is_calm(&self) -> bool {
        self.dvl_vel_std.iter().chain(&self.dr_orient_std).all(|s| *s == 0.0)
    }

    fn validate(&self) -> Result<()> {
        if self
            .dvl_vel_std
            .iter()
            .chain(&self.dr_orient_std)
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::config(
                "disturbance",
                "standard deviations must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// Random-walk calibration of a gyro bias: drift rate mean and walk covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCalibration {
    /// rad/s per second of elapsed time
    pub mu_b: Vector3<f64>,
    pub walk_cov: Matrix3<f64>,
}

impl BiasCalibration {
    pub fn new(mu_b: Vector3<f64>, walk_cov: Matrix3<f64>) -> Result<Self> {
        let dm = DMatrix::from_iterator(3, 3, walk_cov.iter().copied());
        if !crate::geo::is_valid_covariance(&dm) {
            return Err(Error::config("bias.walk", "walk covariance must be PSD"));
        }
        Ok(BiasCalibration { mu_b, walk_cov })
    }

    pub fn zero() -> Self {
        BiasCalibration {
            mu_b: Vector3::zeros(),
            walk_cov: Matrix3::zeros(),
        }
    }
}

/// Measurement channels known to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    Barometer,
    DvlVelocity,
    ImuGyro,
    DrOrientation,
}

impl Sensor {
    pub fn dim(self) -> usize {
        match self {
            Sensor::Barometer => 1,
            _ => 3,
        }
    }
}

/// One row of the wave characterisation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEntry {
    pub amplitude: f64,
    pub frequency: f64,
    pub dvl_std: [f64; 3],
    #[serde(default = "default_dr_std")]
    pub dr_std: [f64; 3],
}

fn default_dr_std() -> [f64; 3] {
    DEFAULT_DR_ORIENT_STD
}

impl DisturbanceEntry {
    pub fn wave(&self) -> WaveCondition {
        WaveCondition {
            amplitude: self.amplitude,
            frequency: self.frequency,
        }
    }

    pub fn profile(&self) -> DisturbanceProfile {
        DisturbanceProfile {
            dvl_vel_std: self.dvl_std,
            dr_orient_std: self.dr_std,
        }
    }
}

/// Wave condition to disturbance lookup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DisturbanceTable {
    pub rows: Vec<DisturbanceEntry>,
}

impl DisturbanceTable {
    pub fn new(rows: Vec<DisturbanceEntry>) -> Result<Self> {
        let table = DisturbanceTable { rows };
        table.validate()?;
        Ok(table)
    }

    /// The three measured wave-tank rows, with the default DR orientation spread.
    pub fn wave_tank() -> Self {
        let row = |amplitude, frequency, dvl_std| DisturbanceEntry {
            amplitude,
            frequency,
            dvl_std,
            dr_std: DEFAULT_DR_ORIENT_STD,
        };
        DisturbanceTable {
            rows: vec![
                row(0.1, 1.0, [0.025, 0.010, 0.003]),
                row(0.1, 0.75, [0.040, 0.010, 0.003]),
                row(0.05, 0.75, [0.011, 0.010, 0.003]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::config("disturbance", "table is empty"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            WaveCondition::new(row.amplitude, row.frequency)
                .map_err(|e| Error::config(format!("disturbance[{i}]"), e.to_string()))?;
            row.profile()
                .validate()
                .map_err(|e| Error::config(format!("disturbance[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    /// Disturbance for a wave condition: an exact row match, else the
    /// nearest row after per-axis min-max normalisation. Calm water maps to
    /// the zero profile.
    pub fn lookup_profile(&self, wave: WaveCondition) -> Result<DisturbanceProfile> {
        if self.rows.is_empty() {
            return Err(Error::config("disturbance", "table is empty"));
        }
        if wave.is_calm() {
            return Ok(DisturbanceProfile::CALM);
        }
        if let Some(row) = self.rows.iter().find(|r| {
            (r.amplitude - wave.amplitude).abs() <= MATCH_TOL && (r.frequency - wave.frequency).abs() <= MATCH_TOL
        }) {
            return Ok(row.profile());
        }

        let span = |f: fn(&DisturbanceEntry) -> f64| {
            let lo = self.rows.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = self.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let norm = |v: f64, (lo, hi): (f64, f64)| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        let amp_span = span(|r| r.amplitude);
        let freq_span = span(|r| r.frequency);
        let qa = norm(wave.amplitude, amp_span);
        let qf = norm(wave.frequency, freq_span);

        // First row wins ties, keeping the lookup deterministic.
        let mut best = &self.rows[0];
        let mut best_d = f64::INFINITY;
        for row in &self.rows {
            let da = norm(row.amplitude, amp_span) - qa;
            let df = norm(row.frequency, freq_span) - qf;
            let d = da * da + df * df;
            if d < best_d {
                best_d = d;
                best = row;
            }
        }
        Ok(best.profile())
    }
}

/// Free function form of [`DisturbanceTable::lookup_profile`] over a raw row list.
pub fn lookup_profile(wave: WaveCondition, table: &[DisturbanceEntry]) -> Result<DisturbanceProfile> {
    DisturbanceTable { rows: table.to_vec() }.lookup_profile(wave)
}

/// Adds the disturbance variance to a base measurement covariance.
///
/// DVL velocity and DR orientation gain `diag(σ²)`; barometer and gyro
/// covariances are returned unchanged.
pub fn inflate_measurement_cov(
    base: &DMatrix<f64>,
    profile: &DisturbanceProfile,
    sensor: Sensor,
) -> Result<DMatrix<f64>> {
    let dim = sensor.dim();
    if base.nrows() != dim || base.ncols() != dim {
        return Err(Error::Contract(format!(
            "{sensor:?} covariance must be {dim}x{dim}, got {}x{}",
            base.nrows(),
            base.ncols()
        )));
    }
    let std = match sensor {
        Sensor::DvlVelocity => &profile.dvl_vel_std,
        Sensor::DrOrientation => &profile.dr_orient_std,
        Sensor::Barometer | Sensor::ImuGyro => return Ok(base.clone()),
    };
    let mut out = base.clone();
    for (i, s) in std.iter().enumerate() {
        out[(i, i)] += s * s;
    }
    Ok(out)
}

/// Fixed-size convenience over [`inflate_measurement_cov`] for the 3-axis channels.
pub fn inflate3(base: &Matrix3<f64>, profile: &DisturbanceProfile, sensor: Sensor) -> Matrix3<f64> {
    let std = match sensor {
        Sensor::DvlVelocity => profile.dvl_vel_std,
        Sensor::DrOrientation => profile.dr_orient_std,
        Sensor::Barometer | Sensor::ImuGyro => return *base,
    };
    base + Matrix3::from_diagonal(&Vector3::from(std).component_mul(&Vector3::from(std)))
}

/// A wave condition active over `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveInterval {
    pub t_start: f64,
    pub t_end: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl WaveInterval {
    pub fn wave(&self) -> WaveCondition {
        WaveCondition {
            amplitude: self.amplitude,
            frequency: self.frequency,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Time-ordered, non-overlapping wave intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WaveSchedule {
    pub intervals: Vec<WaveInterval>,
}

impl WaveSchedule {
    pub fn new(mut intervals: Vec<WaveInterval>) -> Result<Self> {
        intervals.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        let schedule = WaveSchedule { intervals };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, iv) in self.intervals.iter().enumerate() {
            let key = format!("scenario.waves[{i}]");
            if !(iv.t_end > iv.t_start) {
                return Err(Error::config(key, "t_end must exceed t_start"));
            }
            WaveCondition::new(iv.amplitude, iv.frequency).map_err(|e| Error::config(key.clone(), e.to_string()))?;
        }
        let mut sorted: Vec<_> = self.intervals.iter().collect();
        sorted.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        for pair in sorted.windows(2) {
            if pair[1].t_start < pair[0].t_end {
                return Err(Error::config("scenario.waves", "intervals overlap"));
            }
        }
        Ok(())
    }

    /// Active wave at time `t`, if any.
    pub fn condition_at(&self, t: f64) -> Option<WaveCondition> {
        self.intervals.iter().find(|iv| iv.contains(t)).map(|iv| iv.wave())
    }

    /// Disturbance profile at time `t` (calm outside every interval).
    pub fn profile_at(&self, t: f64, table: &DisturbanceTable) -> Result<DisturbanceProfile> {
        match self.condition_at(t) {
            Some(w) => table.lookup_profile(w),
            None => Ok(DisturbanceProfile::CALM),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::min_eigenvalue;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> DisturbanceTable {
        DisturbanceTable::wave_tank()
    }

    #[test]
    fn lookup_measured_rows() {
        let t = table();
        let p = t.lookup_profile(WaveCondition::new(0.1, 1.0).unwrap()).unwrap();
        assert_eq!(p.dvl_vel_std, [0.025, 0.010, 0.003]);
        let p = t.lookup_profile(WaveCondition::new(0.1, 0.75).unwrap()).unwrap();
        assert_eq!(p.dvl_vel_std, [0.040, 0.010, 0.003]);
        let p = t.lookup_profile(WaveCondition::new(0.0, 0.3).unwrap()).unwrap();
        assert!(p.is_calm());
    }

    #[test]
    fn lookup_returns_rows_verbatim() {
        let t = table();
        for row in &t.rows {
            assert_eq!(t.lookup_profile(row.wave()).unwrap(), row.profile());
        }
    }

    #[test]
    fn lookup_nearest_after_normalisation() {
        let t = table();
        // amplitude normalised 0.9, frequency 0.0: closest to row 2 (1.0, 0.0).
        let p = t.lookup_profile(WaveCondition::new(0.095, 0.75).unwrap()).unwrap();
        assert_eq!(p.dvl_vel_std, [0.040, 0.010, 0.003]);
        // (0.06, 0.99) normalises to (0.2, 0.96): nearest to row 1 at (1, 1).
        let p = t.lookup_profile(WaveCondition::new(0.06, 0.99).unwrap()).unwrap();
        assert_eq!(p.dvl_vel_std, [0.025, 0.010, 0.003]);
    }

    #[test]
    fn empty_table_is_a_configuration_error() {
        let err = lookup_profile(WaveCondition::new(0.1, 1.0).unwrap(), &[]).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn inflation_examples() {
        let base = DMatrix::from_diagonal_element(3, 3, 0.01 * 0.01);
        let same = inflate_measurement_cov(&base, &DisturbanceProfile::CALM, Sensor::DvlVelocity).unwrap();
        assert_eq!(same, base);

        let row1 = table().rows[0].profile();
        let out = inflate_measurement_cov(&base, &row1, Sensor::DvlVelocity).unwrap();
        let expect = [
            0.01f64.powi(2) + 0.025f64.powi(2),
            0.01f64.powi(2) + 0.010f64.powi(2),
            0.01f64.powi(2) + 0.003f64.powi(2),
        ];
        for i in 0..3 {
            assert!((out[(i, i)] - expect[i]).abs() < 1e-18);
        }
        let gyro = inflate_measurement_cov(&base, &row1, Sensor::ImuGyro).unwrap();
        assert_eq!(gyro, base);
        let baro = DMatrix::from_element(1, 1, 0.02);
        assert_eq!(inflate_measurement_cov(&baro, &row1, Sensor::Barometer).unwrap(), baro);
    }

    #[test]
    fn inflation_dimension_mismatch() {
        let base = DMatrix::identity(2, 2);
        let err = inflate_measurement_cov(&base, &DisturbanceProfile::CALM, Sensor::DvlVelocity);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn inflation_never_removes_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let base = &a * a.transpose();
            let profile = DisturbanceProfile {
                dvl_vel_std: [
                    rng.random_range(0.0..0.1),
                    rng.random_range(0.0..0.1),
                    rng.random_range(0.0..0.1),
                ],
                dr_orient_std: [
                    rng.random_range(0.0..0.1),
                    rng.random_range(0.0..0.1),
                    rng.random_range(0.0..0.1),
                ],
            };
            for sensor in [Sensor::DvlVelocity, Sensor::DrOrientation, Sensor::ImuGyro] {
                let out = inflate_measurement_cov(&base, &profile, sensor).unwrap();
                assert!(min_eigenvalue(&(out - &base)) >= -1e-15);
            }
            let fixed = Matrix3::from_iterator(base.iter().copied());
            let out3 = inflate3(&fixed, &profile, Sensor::DrOrientation);
            let outd = inflate_measurement_cov(&base, &profile, Sensor::DrOrientation).unwrap();
            assert!((DMatrix::from_iterator(3, 3, out3.iter().copied()) - outd).abs().max() < 1e-15);
        }
    }

    #[test]
    fn schedule_rejects_overlap_and_reports_profile() {
        let iv = |a, b| WaveInterval {
            t_start: a,
            t_end: b,
            amplitude: 0.1,
            frequency: 1.0,
        };
        assert!(WaveSchedule::new(vec![iv(0.0, 10.0), iv(5.0, 20.0)]).is_err());
        let s = WaveSchedule::new(vec![iv(10.0, 20.0), iv(0.0, 10.0)]).unwrap();
        assert!(s.condition_at(10.0).is_some());
        assert!(s.condition_at(20.0).is_none());
        assert_eq!(s.profile_at(25.0, &table()).unwrap(), DisturbanceProfile::CALM);
        assert_eq!(s.profile_at(3.0, &table()).unwrap().dvl_vel_std, [0.025, 0.010, 0.003]);
    }
}

//! Timestamped sensor records shared by the simulator, estimator and mapper.

use nalgebra::Vector3;

/// Beam id used for the single-beam ping sonar; DVL beams use 0 to 3.
pub const SONAR_BEAM_ID: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// Depth in metres (positive down).
    Barometer { depth: f64 },
    /// Body-frame velocity, m/s.
    DvlVelocity(Vector3<f64>),
    /// Body angular rate including the IMU gyro bias, rad/s.
    ImuGyro(Vector3<f64>),
    /// DVL dead-reckoning attitude (roll, pitch, yaw) including its drift, rad.
    DrOrientation(Vector3<f64>),
    /// Range along one acoustic beam, metres.
    RangeBeam { beam_id: u8, range: f64 },
}

impl Measurement {
    /// Tag used in the on-disk sensor log.
    pub fn tag(&self) -> &'static str {
        match self {
            Measurement::Barometer { .. } => "barometer",
            Measurement::DvlVelocity(_) => "dvl_vel",
            Measurement::ImuGyro(_) => "imu_gyro",
            Measurement::DrOrientation(_) => "dr_orient",
            Measurement::RangeBeam { .. } => "range_beam",
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Measurement::Barometer { depth } => depth.is_finite(),
            Measurement::DvlVelocity(v) | Measurement::ImuGyro(v) | Measurement::DrOrientation(v) => {
                v.iter().all(|x| x.is_finite())
            }
            Measurement::RangeBeam { range, .. } => range.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    /// seconds
    pub t: f64,
    pub measurement: Measurement,
}

impl SensorSample {
    pub fn new(t: f64, measurement: Measurement) -> Self {
        SensorSample { t, measurement }
    }
}

/// Stable merge of per-sensor streams into one time-ordered stream.
pub fn merge_streams(streams: Vec<Vec<SensorSample>>) -> Vec<SensorSample> {
    let mut all: Vec<SensorSample> = streams.into_iter().flatten().collect();
    all.sort_by(|a, b| a.t.total_cmp(&b.t));
    all
}

pub fn is_time_sorted(samples: &[SensorSample]) -> bool {
    samples.windows(2).all(|w| w[0].t <= w[1].t)
}

//! Noisy sensor logs from ground truth.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

use super::scenario::{FloorSpec, Scenario};
use super::truth::{sample_times, GroundTruthLog, Phase, Trajectory};
use crate::bki::{BeamGeometry, BeamSensor};
use crate::disturbance::DisturbanceTable;
use crate::error::Result;
use crate::geo::wrap_angle;
use crate::sample::{merge_streams, Measurement, SensorSample};

const STREAM_BAROMETER: u64 = 1;
const STREAM_DVL: u64 = 2;
const STREAM_IMU: u64 = 3;
const STREAM_DR: u64 = 4;
const STREAM_RANGE: u64 = 5;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss3(rng: &mut ChaCha8Rng, std: [f64; 3]) -> Vector3<f64> {
    Vector3::from_fn(|j, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * std[j]
    })
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * std
}

/// Distance along a ray to the first surface of the scene, if any.
pub fn ray_cast(floor: &FloorSpec, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if t > 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    if dir.z > 0.0 {
        keep((floor.depth - origin.z) / dir.z);
    }
    for b in &floor.obstacles {
        // slab test
        let mut t_in = f64::NEG_INFINITY;
        let mut t_out = f64::INFINITY;
        let mut miss = false;
        for j in 0..3 {
            if dir[j] == 0.0 {
                if origin[j] < b.min[j] || origin[j] > b.max[j] {
                    miss = true;
                }
                continue;
            }
            let t1 = (b.min[j] - origin[j]) / dir[j];
            let t2 = (b.max[j] - origin[j]) / dir[j];
            t_in = t_in.max(t1.min(t2));
            t_out = t_out.min(t1.max(t2));
        }
        if !miss && t_in <= t_out && t_in > 0.0 {
            keep(t_in);
        }
    }
    best
}

fn wave_offset(scn: &Scenario, t: f64) -> f64 {
    match scn.waves.condition_at(t) {
        Some(w) => scn.noise.wave_coupling * w.amplitude * (TAU * w.frequency * t).sin(),
        None => 0.0,
    }
}

/// Simulated sensor log, merged into one time-ordered stream.
///
/// Each sensor draws from its own seeded generator, so switching one
/// sensor's noise off leaves the others bit-identical.
pub fn synthesize_sensors(
    truth: &GroundTruthLog,
    scn: &Scenario,
    table: &DisturbanceTable,
    geometry: &BeamGeometry,
) -> Result<Vec<SensorSample>> {
    let tr = &truth.trajectory;
    let n = &scn.noise;
    let dur = tr.duration();

    let mut rng = stream_rng(scn.seed, STREAM_BAROMETER);
    let baro = sample_times(dur, scn.rates.barometer)
        .into_iter()
        .map(|t| {
            let depth = tr.state_at(t).pose.z + gauss(&mut rng, n.barometer_std) + wave_offset(scn, t);
            SensorSample::new(t, Measurement::Barometer { depth })
        })
        .collect();

    let mut rng = stream_rng(scn.seed, STREAM_DVL);
    let mut dvl = Vec::new();
    for t in sample_times(dur, scn.rates.dvl) {
        let profile = scn.waves.profile_at(t, table)?;
        let v = tr.state_at(t).twist.linear() + gauss3(&mut rng, n.dvl_std) + gauss3(&mut rng, profile.dvl_vel_std);
        dvl.push(SensorSample::new(t, Measurement::DvlVelocity(v)));
    }

    let mut rng = stream_rng(scn.seed, STREAM_IMU);
    let bias = Vector3::from(n.imu_bias);
    let imu = sample_times(dur, scn.rates.imu)
        .into_iter()
        .map(|t| {
            let w = tr.state_at(t).twist.angular() + bias + gauss3(&mut rng, n.imu_std);
            SensorSample::new(t, Measurement::ImuGyro(w))
        })
        .collect();

    let mut rng = stream_rng(scn.seed, STREAM_DR);
    let drift = Vector3::from(n.dr_drift_rate);
    let dr = sample_times(dur, scn.rates.dr)
        .into_iter()
        .map(|t| {
            let wave = if scn.waves.condition_at(t).is_some() {
                n.dr_wave_std
            } else {
                [0.0; 3]
            };
            let a = tr.state_at(t).pose.euler() + drift * t + gauss3(&mut rng, n.dr_std) + gauss3(&mut rng, wave);
            SensorSample::new(t, Measurement::DrOrientation(a.map(wrap_angle)))
        })
        .collect();

    let mut rng = stream_rng(scn.seed, STREAM_RANGE);
    let mut ranges = Vec::new();
    let mut beam_times: Vec<(f64, BeamSensor)> = Vec::new();
    for t in sample_times(dur, scn.rates.dvl) {
        beam_times.extend((0..4).map(|i| (t, BeamSensor::Dvl(i))));
    }
    beam_times.extend(
        sample_times(dur, scn.rates.sonar)
            .into_iter()
            .map(|t| (t, BeamSensor::Sonar)),
    );
    beam_times.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (t, sensor) in beam_times {
        let pose = tr.state_at(t).pose;
        let mount = geometry.mount(sensor);
        let r = pose.rotation();
        let origin = pose.position() + r * mount.offset;
        let noise = gauss(&mut rng, n.range_std);
        if let Some(range) = ray_cast(&scn.floor, &origin, &(r * mount.direction)) {
            let range = range + noise + wave_offset(scn, t);
            if range > 0.0 {
                ranges.push(SensorSample::new(
                    t,
                    Measurement::RangeBeam {
                        beam_id: sensor.id(),
                        range,
                    },
                ));
            }
        }
    }

    Ok(merge_streams(vec![baro, dvl, imu, dr, ranges]))
}

/// Adds a constant offset to every DVL velocity sample, or only to those
/// taken while the carriage is cruising.
pub fn inject_velocity_offset(
    samples: &[SensorSample],
    offset: Vector3<f64>,
    cruise_only: bool,
    trajectory: &Trajectory,
) -> Vec<SensorSample> {
    samples
        .iter()
        .map(|s| match s.measurement {
            Measurement::DvlVelocity(v) if !cruise_only || trajectory.state_at(s.t).phase == Phase::Cruise => {
                SensorSample::new(s.t, Measurement::DvlVelocity(v + offset))
            }
            _ => *s,
        })
        .collect()
}

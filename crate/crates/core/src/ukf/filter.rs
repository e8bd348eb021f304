//! Prediction, the four linear measurement updates, and the sample-driven run loop.

use log::{debug, warn};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::sigma::{generate_sigma_points, residual, weighted_cov, weighted_mean, SigmaParams};
use super::state::*;
use crate::disturbance::{inflate3, DisturbanceProfile, DisturbanceTable, Sensor, WaveSchedule};
use crate::error::{Error, Result};
use crate::geo::{euler_to_rotation, wrap_angle};
use crate::sample::{is_time_sorted, Measurement, SensorSample};

/// Largest prediction step taken without a diagnostic.
pub const MAX_PREDICT_DT: f64 = 1.0;

/// Constant-velocity propagation of one packed state.
fn propagate(x: &StateVector, dt: f64, noise: &ProcessNoise) -> StateVector {
    let mut out = *x;
    let rot = euler_to_rotation(x[ATT], x[ATT + 1], x[ATT + 2]);
    let lin = x.fixed_rows::<3>(LIN_VEL).into_owned();
    let ang = x.fixed_rows::<3>(ANG_VEL).into_owned();
    let dp = rot * lin * dt;
    for i in 0..3 {
        out[POS + i] += dp[i];
        out[ATT + i] = wrap_angle(x[ATT + i] + ang[i] * dt);
        out[BIAS_DR + i] += noise.bias_mean_dr[i] * dt;
        out[BIAS_IMU + i] += noise.bias_mean_imu[i] * dt;
    }
    out
}

/// Discrete process noise: acceleration mapped through
/// `G = [R·dt²/2, 0; 0, I·dt²/2; I·dt]`, plus bias walks scaled by `dt`.
pub fn discrete_process_noise(mean: &StateVector, dt: f64, noise: &ProcessNoise) -> StateMatrix {
    let rot = euler_to_rotation(mean[ATT], mean[ATT + 1], mean[ATT + 2]);
    let mut g = SMatrix::<f64, STATE_DIM, 6>::zeros();
    let half = 0.5 * dt * dt;
    g.fixed_view_mut::<3, 3>(POS, 0).copy_from(&(rot * half));
    g.fixed_view_mut::<3, 3>(ATT, 3)
        .copy_from(&(Matrix3::identity() * half));
    for i in 0..6 {
        g[(LIN_VEL + i, i)] = dt;
    }
    let mut q = g * noise.accel_cov * g.transpose();
    let mut dr = q.fixed_view_mut::<3, 3>(BIAS_DR, BIAS_DR);
    dr += noise.bias_walk_dr * dt;
    let mut imu = q.fixed_view_mut::<3, 3>(BIAS_IMU, BIAS_IMU);
    imu += noise.bias_walk_imu * dt;
    q
}

fn symmetrize(m: &StateMatrix) -> StateMatrix {
    0.5 * (m + m.transpose())
}

/// Unscented prediction by `dt` seconds under the constant-velocity model.
pub fn predict(belief: &StateBelief, dt: f64, noise: &ProcessNoise, params: &SigmaParams) -> Result<StateBelief> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Contract(format!("prediction step must be positive, got {dt}")));
    }
    if dt > MAX_PREDICT_DT {
        warn!("prediction step of {dt:.3} s exceeds {MAX_PREDICT_DT} s");
    }
    let sigma = generate_sigma_points(&belief.mean(), &belief.cov, params, &ANGLES)?;
    let moved: Vec<StateVector> = sigma.points.iter().map(|x| propagate(x, dt, noise)).collect();
    let mean = weighted_mean(&moved, &sigma.wm, &ANGLES);
    let cov = weighted_cov(&moved, &mean, &sigma.wc, &ANGLES) + discrete_process_noise(&mean, dt, noise);
    Ok(StateBelief {
        state: RobotState::from_vector(&mean),
        cov: symmetrize(&cov),
        t: belief.t + dt,
    })
}

/// Linear observation `z = H x + noise`, optionally on the circle.
struct Observation<const M: usize> {
    h: SMatrix<f64, M, STATE_DIM>,
    angular: bool,
}

impl<const M: usize> Observation<M> {
    fn select(entries: &[(usize, usize)]) -> Self {
        let mut h = SMatrix::<f64, M, STATE_DIM>::zeros();
        for &(row, col) in entries {
            h[(row, col)] = 1.0;
        }
        Observation { h, angular: false }
    }
}

fn unscented_update<const M: usize>(
    belief: &StateBelief,
    obs: &Observation<M>,
    z: &SVector<f64, M>,
    r: &SMatrix<f64, M, M>,
    params: &SigmaParams,
) -> Result<StateBelief> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Rejected("non-finite measurement".into()));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Rejected("non-finite measurement covariance".into()));
    }
    let mean = belief.mean();
    let sigma = generate_sigma_points(&mean, &belief.cov, params, &ANGLES)?;

    // Work in residuals about the prior mean so wrapped angles stay continuous.
    let dx: Vec<StateVector> = sigma.points.iter().map(|p| residual(p, &mean, &ANGLES)).collect();
    let dz: Vec<SVector<f64, M>> = dx.iter().map(|d| obs.h * d).collect();
    let dx_mean: StateVector = dx.iter().zip(&sigma.wm).map(|(d, w)| d * *w).sum();
    let dz_mean: SVector<f64, M> = dz.iter().zip(&sigma.wm).map(|(d, w)| d * *w).sum();

    let mut s = *r;
    let mut pxz = SMatrix::<f64, STATE_DIM, M>::zeros();
    for ((dxi, dzi), w) in dx.iter().zip(&dz).zip(&sigma.wc) {
        let ez = dzi - dz_mean;
        s += ez * ez.transpose() * *w;
        pxz += (dxi - dx_mean) * ez.transpose() * *w;
    }
    let s = 0.5 * (s + s.transpose());

    let z_pred = obs.h * mean + dz_mean;
    let mut innovation = z - z_pred;
    if obs.angular {
        innovation.iter_mut().for_each(|v| *v = wrap_angle(*v));
    }

    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| s.try_inverse())
        .ok_or_else(|| Error::CovarianceDegenerate("innovation covariance is singular".into()))?;
    let gain = pxz * s_inv;

    let mut post = mean + dx_mean + gain * innovation;
    for &i in &ANGLES {
        post[i] = wrap_angle(post[i]);
    }
    let cov = symmetrize(&(belief.cov - gain * s * gain.transpose()));
    Ok(StateBelief {
        state: RobotState::from_vector(&post),
        cov,
        t: belief.t,
    })
}

/// Depth update: the barometer observes `z` directly.
pub fn update_barometer(belief: &StateBelief, depth: f64, r_bar: f64, params: &SigmaParams) -> Result<StateBelief> {
    if !depth.is_finite() {
        return Err(Error::Rejected("non-finite depth".into()));
    }
    if !(r_bar > 0.0) {
        return Err(Error::Contract(format!("barometer variance must be > 0, got {r_bar}")));
    }
    let obs = Observation::<1>::select(&[(0, POS + 2)]);
    unscented_update(
        belief,
        &obs,
        &SVector::<f64, 1>::new(depth),
        &SMatrix::<f64, 1, 1>::new(r_bar),
        params,
    )
}

/// Body-velocity update with the base covariance widened by the wave disturbance.
pub fn update_dvl(
    belief: &StateBelief,
    z_vel: &Vector3<f64>,
    r_dvl: &Matrix3<f64>,
    profile: &DisturbanceProfile,
    params: &SigmaParams,
) -> Result<StateBelief> {
    let obs = Observation::<3>::select(&[(0, LIN_VEL), (1, LIN_VEL + 1), (2, LIN_VEL + 2)]);
    let r = inflate3(r_dvl, profile, Sensor::DvlVelocity);
    unscented_update(belief, &obs, z_vel, &r, params)
}

fn gyro_observation(with_bias: bool) -> Observation<3> {
    let mut entries = vec![(0, ANG_VEL), (1, ANG_VEL + 1), (2, ANG_VEL + 2)];
    if with_bias {
        entries.extend([(0, BIAS_IMU), (1, BIAS_IMU + 1), (2, BIAS_IMU + 2)]);
    }
    Observation::select(&entries)
}

fn dr_observation(with_bias: bool) -> Observation<3> {
    let mut entries = vec![(0, ATT), (1, ATT + 1), (2, ATT + 2)];
    if with_bias {
        entries.extend([(0, BIAS_DR), (1, BIAS_DR + 1), (2, BIAS_DR + 2)]);
    }
    let mut obs = Observation::select(&entries);
    obs.angular = true;
    obs
}

/// Gyro update: the IMU reports body rate plus its own bias.
pub fn update_imu_gyro(
    belief: &StateBelief,
    z_gyro: &Vector3<f64>,
    r_imu: &Matrix3<f64>,
    params: &SigmaParams,
) -> Result<StateBelief> {
    unscented_update(belief, &gyro_observation(true), z_gyro, r_imu, params)
}

/// Gyro update that treats the reading as the bare body rate.
pub fn update_imu_gyro_unbiased(
    belief: &StateBelief,
    z_gyro: &Vector3<f64>,
    r_imu: &Matrix3<f64>,
    params: &SigmaParams,
) -> Result<StateBelief> {
    unscented_update(belief, &gyro_observation(false), z_gyro, r_imu, params)
}

/// Attitude update from the DVL dead-reckoning output plus its drift bias.
pub fn update_dr_orientation(
    belief: &StateBelief,
    z_euler: &Vector3<f64>,
    r_dr: &Matrix3<f64>,
    profile: &DisturbanceProfile,
    params: &SigmaParams,
) -> Result<StateBelief> {
    let r = inflate3(r_dr, profile, Sensor::DrOrientation);
    unscented_update(belief, &dr_observation(true), z_euler, &r, params)
}

/// Attitude update that ignores the drift bias.
pub fn update_dr_orientation_unbiased(
    belief: &StateBelief,
    z_euler: &Vector3<f64>,
    r_dr: &Matrix3<f64>,
    profile: &DisturbanceProfile,
    params: &SigmaParams,
) -> Result<StateBelief> {
    let r = inflate3(r_dr, profile, Sensor::DrOrientation);
    unscented_update(belief, &dr_observation(false), z_euler, &r, params)
}

/// The two ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterOptions {
    pub bias_estimation: bool,
    pub added_noise: bool,
}

impl FilterOptions {
    pub const BASELINE: FilterOptions = FilterOptions {
        bias_estimation: false,
        added_noise: false,
    };
    pub const PROPOSED: FilterOptions = FilterOptions {
        bias_estimation: true,
        added_noise: true,
    };
}

/// Everything the run loop needs besides the samples.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub sigma: SigmaParams,
    pub noise: ProcessNoise,
    pub sensors: SensorNoise,
    pub options: FilterOptions,
    pub table: DisturbanceTable,
    pub schedule: WaveSchedule,
}

impl FilterConfig {
    fn effective_noise(&self) -> ProcessNoise {
        if self.options.bias_estimation {
            self.noise
        } else {
            self.noise.without_bias()
        }
    }

    fn profile_at(&self, t: f64) -> Result<DisturbanceProfile> {
        if self.options.added_noise {
            self.schedule.profile_at(t, &self.table)
        } else {
            Ok(DisturbanceProfile::CALM)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterDiagnostics {
    pub rejected: usize,
    pub long_gaps: usize,
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    /// Initial belief followed by one belief per input sample.
    pub beliefs: Vec<StateBelief>,
    pub diagnostics: FilterDiagnostics,
}

/// Applies one sample's update to an already-predicted belief.
pub fn apply_measurement(
    belief: &StateBelief,
    measurement: &Measurement,
    config: &FilterConfig,
) -> Result<StateBelief> {
    let params = &config.sigma;
    let bias = config.options.bias_estimation;
    let sensors = &config.sensors;
    match measurement {
        Measurement::Barometer { depth } => update_barometer(belief, *depth, sensors.barometer_var(), params),
        Measurement::DvlVelocity(v) => {
            let profile = config.profile_at(belief.t)?;
            update_dvl(belief, v, &sensors.dvl_cov(), &profile, params)
        }
        Measurement::ImuGyro(g) if bias => update_imu_gyro(belief, g, &sensors.imu_cov(), params),
        Measurement::ImuGyro(g) => update_imu_gyro_unbiased(belief, g, &sensors.imu_cov(), params),
        Measurement::DrOrientation(e) => {
            let profile = config.profile_at(belief.t)?;
            if bias {
                update_dr_orientation(belief, e, &sensors.dr_cov(), &profile, params)
            } else {
                update_dr_orientation_unbiased(belief, e, &sensors.dr_cov(), &profile, params)
            }
        }
        Measurement::RangeBeam { .. } => Ok(belief.clone()),
    }
}

/// Runs the filter over a time-ordered sample stream, predicting to every
/// sample's timestamp before applying its update.
pub fn run_filter(samples: &[SensorSample], init: &StateBelief, config: &FilterConfig) -> Result<FilterRun> {
    if !is_time_sorted(samples) {
        return Err(Error::Contract("samples are not sorted by timestamp".into()));
    }
    if let Some(first) = samples.first() {
        if first.t < init.t {
            return Err(Error::Contract("first sample precedes the initial belief".into()));
        }
    }
    config.sigma.validate(STATE_DIM)?;
    let noise = config.effective_noise();
    let mut diagnostics = FilterDiagnostics::default();
    let mut beliefs = Vec::with_capacity(samples.len() + 1);
    beliefs.push(init.clone());
    let mut current = init.clone();

    for sample in samples {
        let mut gap = sample.t - current.t;
        if gap > MAX_PREDICT_DT {
            diagnostics.long_gaps += 1;
            warn!("gap of {gap:.3} s before t = {:.3}, sub-stepping", sample.t);
        }
        while gap > 0.0 {
            let dt = gap.min(MAX_PREDICT_DT);
            current = predict(&current, dt, &noise, &config.sigma)?;
            gap -= dt;
        }
        current.t = sample.t;

        match apply_measurement(&current, &sample.measurement, config) {
            Ok(next) => current = next,
            Err(Error::Rejected(why)) => {
                diagnostics.rejected += 1;
                debug!(
                    "t = {:.3}: {} sample rejected: {why}",
                    sample.t,
                    sample.measurement.tag()
                );
            }
            Err(e) => return Err(e),
        }
        beliefs.push(current.clone());
    }
    Ok(FilterRun { beliefs, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::DisturbanceTable;
    use crate::geo::{min_eigenvalue, Pose, Twist};
    use nalgebra::DMatrix;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> SigmaParams {
        SigmaParams::default()
    }

    fn belief_with(state: RobotState, var: f64) -> StateBelief {
        StateBelief::new(state, StateMatrix::identity() * var, 0.0).unwrap()
    }

    fn small_noise() -> ProcessNoise {
        ProcessNoise::from_std([0.01; 3], [0.01; 3], [1e-4; 3], [1e-4; 3])
    }

    fn psd_diff(a: &StateMatrix, b: &StateMatrix) -> f64 {
        min_eigenvalue(&DMatrix::from_iterator(STATE_DIM, STATE_DIM, (a - b).iter().copied()))
    }

    #[test]
    fn stationary_prediction_keeps_mean_and_grows_covariance() {
        let b = belief_with(RobotState::default(), 0.01);
        let p = predict(&b, 0.1, &small_noise(), &params()).unwrap();
        assert!((p.mean() - b.mean()).abs().max() < 1e-12);
        assert!(p.cov.trace() > b.cov.trace());
        assert!(p.is_consistent());
    }

    #[test]
    fn zero_noise_prediction_is_identity_on_mean() {
        let s = RobotState {
            pose: Pose::new(1.0, -2.0, 3.0, 0.1, -0.2, 3.0),
            ..RobotState::default()
        };
        let b = belief_with(s, 1e-3);
        let p = predict(&b, 0.2, &ProcessNoise::zero(), &params()).unwrap();
        assert!((p.mean() - b.mean()).abs().max() < 1e-12);
    }

    #[test]
    fn axis_aligned_integration() {
        let s = RobotState {
            twist: Twist {
                u: 1.0,
                ..Twist::default()
            },
            ..RobotState::default()
        };
        let b = belief_with(s, 0.0);
        let p = predict(&b, 0.1, &ProcessNoise::zero(), &params()).unwrap();
        assert!((p.state.pose.x - 0.1).abs() < 1e-12);
        assert!((p.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn yawed_integration_moves_along_y() {
        let mut s = RobotState::default();
        s.pose.yaw = FRAC_PI_2;
        s.twist.u = 1.0;
        let b = belief_with(s, 0.0);
        let p = predict(&b, 0.1, &ProcessNoise::zero(), &params()).unwrap();
        assert!((p.state.pose.y - 0.1).abs() < 1e-9);
        assert!(p.state.pose.x.abs() < 1e-9);
    }

    #[test]
    fn bias_mean_drifts() {
        let mut noise = ProcessNoise::zero();
        noise.bias_mean_dr = Vector3::new(0.0, 0.0, 1e-3);
        let b = belief_with(RobotState::default(), 0.0);
        let p = predict(&b, 0.5, &noise, &params()).unwrap();
        assert!((p.state.bias_dr.z - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_dt_is_a_contract_violation() {
        let b = belief_with(RobotState::default(), 0.01);
        for dt in [0.0, -0.1, f64::NAN] {
            assert!(matches!(
                predict(&b, dt, &small_noise(), &params()),
                Err(Error::Contract(_))
            ));
        }
    }

    #[test]
    fn barometer_examples() {
        let b = belief_with(RobotState::default(), 1.0);
        let exact = update_barometer(&b, 1.0, 1e-6, &params()).unwrap();
        assert!((exact.state.pose.z - 1.0).abs() < 1e-3);
        assert!(exact.cov[(2, 2)] <= b.cov[(2, 2)]);
        let vague = update_barometer(&b, 1.0, 1e12, &params()).unwrap();
        assert!((vague.mean() - b.mean()).abs().max() < 1e-6);
        assert!(matches!(
            update_barometer(&b, f64::NAN, 1.0, &params()),
            Err(Error::Rejected(_))
        ));
        assert!(matches!(
            update_barometer(&b, 1.0, 0.0, &params()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn dvl_disturbance_widens_posterior() {
        let b = belief_with(RobotState::default(), 0.01);
        let z = Vector3::new(0.2, 0.0, 0.0);
        let r = Matrix3::identity() * 1e-4;
        let calm = update_dvl(&b, &z, &r, &DisturbanceProfile::CALM, &params()).unwrap();
        let row1 = DisturbanceTable::wave_tank().rows[0].profile();
        let wavy = update_dvl(&b, &z, &r, &row1, &params()).unwrap();
        assert!(wavy.cov[(LIN_VEL, LIN_VEL)] > calm.cov[(LIN_VEL, LIN_VEL)]);
        assert!(psd_diff(&wavy.cov, &calm.cov) >= -1e-12);
        let bad = Vector3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            update_dvl(&b, &bad, &r, &row1, &params()),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn gyro_zero_innovation_keeps_mean() {
        let mut s = RobotState::default();
        s.twist.r = 0.05;
        let b = belief_with(s, 0.01);
        let post = update_imu_gyro(
            &b,
            &Vector3::new(0.0, 0.0, 0.05),
            &(Matrix3::identity() * 1e-4),
            &params(),
        )
        .unwrap();
        assert!((post.mean() - b.mean()).abs().max() < 1e-12);
        assert!(post.cov.trace() < b.cov.trace());
    }

    #[test]
    fn dr_zero_innovation_and_wrap() {
        let mut s = RobotState::default();
        s.pose.yaw = 0.4;
        s.bias_dr = Vector3::new(0.0, 0.0, 0.1);
        let b = belief_with(s, 0.01);
        let r = Matrix3::identity() * 1e-4;
        let post = update_dr_orientation(
            &b,
            &Vector3::new(0.0, 0.0, 0.5),
            &r,
            &DisturbanceProfile::CALM,
            &params(),
        )
        .unwrap();
        assert!((post.mean() - b.mean()).abs().max() < 1e-12);

        let mut s = RobotState::default();
        s.pose.yaw = 3.1;
        let b = StateBelief::new(s, StateMatrix::identity() * 1e-4, 0.0).unwrap();
        let post = update_dr_orientation_unbiased(
            &b,
            &Vector3::new(0.0, 0.0, -3.1),
            &r,
            &DisturbanceProfile::CALM,
            &params(),
        )
        .unwrap();
        let moved = wrap_angle(post.state.pose.yaw - 3.1);
        // equal prior and measurement variance: halfway along the short arc
        let arc = 2.0 * std::f64::consts::PI - 6.2;
        assert!((moved - arc / 2.0).abs() < 1e-9, "moved {moved}");
    }

    fn run_config(options: FilterOptions) -> FilterConfig {
        FilterConfig {
            sigma: params(),
            noise: small_noise(),
            sensors: SensorNoise::default(),
            options,
            table: DisturbanceTable::wave_tank(),
            schedule: WaveSchedule::default(),
        }
    }

    #[test]
    fn run_filter_edge_cases() {
        let init = belief_with(RobotState::default(), 0.1);
        let cfg = run_config(FilterOptions::PROPOSED);
        let out = run_filter(&[], &init, &cfg).unwrap();
        assert_eq!(out.beliefs.len(), 1);
        assert_eq!(out.beliefs[0], init);

        let one = [SensorSample::new(0.1, Measurement::Barometer { depth: 0.3 })];
        let out = run_filter(&one, &init, &cfg).unwrap();
        assert_eq!(out.beliefs.len(), 2);
        assert!(out.beliefs[1].cov[(2, 2)] < init.cov[(2, 2)]);

        let unsorted = [
            SensorSample::new(0.2, Measurement::Barometer { depth: 0.3 }),
            SensorSample::new(0.1, Measurement::Barometer { depth: 0.3 }),
        ];
        assert!(matches!(run_filter(&unsorted, &init, &cfg), Err(Error::Contract(_))));

        let bad = [
            SensorSample::new(0.1, Measurement::DvlVelocity(Vector3::new(f64::NAN, 0.0, 0.0))),
            SensorSample::new(0.1, Measurement::Barometer { depth: 0.3 }),
        ];
        let out = run_filter(&bad, &init, &cfg).unwrap();
        assert_eq!(out.diagnostics.rejected, 1);
        assert_eq!(out.beliefs.len(), 3);

        let gap = [SensorSample::new(2.5, Measurement::Barometer { depth: 0.3 })];
        let out = run_filter(&gap, &init, &cfg).unwrap();
        assert_eq!(out.diagnostics.long_gaps, 1);
        assert!((out.beliefs[1].t - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gyro_bias_converges_to_offset() {
        let offset = 0.02;
        let mut init = belief_with(RobotState::default(), 1e-6);
        init.cov.fixed_view_mut::<3, 3>(BIAS_IMU, BIAS_IMU).fill_diagonal(1e-2);
        let cfg = run_config(FilterOptions::PROPOSED);
        let mut samples = Vec::new();
        for k in 1..=100 {
            let t = k as f64 * 0.1;
            samples.push(SensorSample::new(
                t,
                Measurement::ImuGyro(Vector3::new(0.0, 0.0, offset)),
            ));
            samples.push(SensorSample::new(t, Measurement::DrOrientation(Vector3::zeros())));
        }
        let run = run_filter(&samples, &init, &cfg).unwrap();
        let errs: Vec<f64> = run
            .beliefs
            .iter()
            .skip(1)
            .step_by(2)
            .map(|b| (b.state.bias_imu.z - offset).abs())
            .collect();
        let tail = &errs[errs.len() - 50..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{tail:?}");
        assert!(tail[tail.len() - 1] < 0.2 * offset);
    }
}

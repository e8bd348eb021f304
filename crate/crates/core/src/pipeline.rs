//! Simulate, estimate, map and evaluate, in memory or through files.

use log::info;
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::bki::{build_map, BeamGeometry, MapBuild, MapOptions, UncertainPose};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{cloud_to_cloud, derive_body_velocity, trajectory_rmse, EvalReport, TruthRecord};
use crate::io;
use crate::sample::{is_time_sorted, SensorSample};
use crate::sim::{generate_truth, inject_velocity_offset, synthesize_sensors, GroundTruthLog};
use crate::ukf::{
    run_filter, FilterConfig, FilterRun, RobotState, StateBelief, StateMatrix, ANG_VEL, ATT, BIAS_DR, BIAS_IMU,
    LIN_VEL, POS,
};

pub const SENSOR_LOG: &str = "sensors.txt";
pub const TRUTH_HF: &str = "truth_hf.txt";
pub const TRUTH_STATES: &str = "truth.txt";
pub const TRUTH_CLOUD: &str = "truth_cloud.txt";
pub const TRAJECTORY: &str = "trajectory.txt";
pub const GRID: &str = "grid.txt";
pub const CLOUD: &str = "cloud.txt";
pub const REPORT: &str = "report.txt";

pub struct Simulation {
    pub truth: GroundTruthLog,
    pub samples: Vec<SensorSample>,
    pub truth_cloud: Vec<Vector3<f64>>,
}

impl Simulation {
    /// High-rate truth records with analytic velocities.
    pub fn truth_records(&self) -> Vec<TruthRecord> {
        self.truth
            .states()
            .iter()
            .map(|s| io::truth_record(s.t, s.pose, &s.twist))
            .collect()
    }

    /// Exact truth at every distinct sensor timestamp.
    pub fn truth_at_samples(&self) -> Vec<TruthRecord> {
        let mut times: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        times.dedup();
        self.truth
            .states_at(&times)
            .iter()
            .map(|s| io::truth_record(s.t, s.pose, &s.twist))
            .collect()
    }
}

pub fn geometry(cfg: &RunConfig) -> BeamGeometry {
    BeamGeometry::janus(cfg.mapping.dvl_tilt_deg.to_radians())
}

fn truth_cloud(cfg: &RunConfig, truth: &GroundTruthLog) -> Vec<Vector3<f64>> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for (_, p) in &truth.positions {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let m = cfg.evaluation.truth_cloud_margin;
    cfg.scenario.floor.surface_points(
        (lo.x - m, hi.x + m),
        (lo.y - m, hi.y + m),
        cfg.evaluation.truth_cloud_spacing,
    )
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let scn = &cfg.scenario;
    scn.validate()?;
    let truth = generate_truth(&scn.path, scn.rates.truth)?;
    let mut samples = synthesize_sensors(&truth, scn, &cfg.disturbance, &geometry(cfg))?;
    if let Some(f) = scn.dvl_offset {
        samples = inject_velocity_offset(&samples, Vector3::from(f.offset), f.cruise_only, &truth.trajectory);
    }
    let truth_cloud = truth_cloud(cfg, &truth);
    Ok(Simulation {
        truth,
        samples,
        truth_cloud,
    })
}

pub fn filter_config(cfg: &RunConfig) -> FilterConfig {
    FilterConfig {
        sigma: cfg.estimator.sigma,
        noise: cfg.process_noise(),
        sensors: cfg.estimator.sensors,
        options: cfg.filter_options(),
        table: cfg.disturbance.clone(),
        schedule: cfg.scenario.waves.clone(),
    }
}

/// Start pose of the scenario, at rest, with the configured spread.
pub fn initial_belief(cfg: &RunConfig) -> Result<StateBelief> {
    let p = &cfg.scenario.path;
    let state = RobotState {
        pose: crate::geo::Pose::new(
            p.start[0],
            p.start[1],
            p.start[2],
            p.attitude[0],
            p.attitude[1],
            p.attitude[2],
        ),
        ..RobotState::default()
    };
    let i = &cfg.estimator.init;
    let mut cov = StateMatrix::zeros();
    for (base, std) in [
        (POS, i.pos_std),
        (ATT, i.att_std),
        (LIN_VEL, i.vel_std),
        (ANG_VEL, i.ang_vel_std),
        (BIAS_DR, i.bias_std),
        (BIAS_IMU, i.bias_std),
    ] {
        for j in 0..3 {
            cov[(base + j, base + j)] = std[j] * std[j];
        }
    }
    StateBelief::new(state, cov, 0.0)
}

pub fn estimate(cfg: &RunConfig, samples: &[SensorSample]) -> Result<FilterRun> {
    let run = run_filter(samples, &initial_belief(cfg)?, &filter_config(cfg))?;
    if run.diagnostics.rejected > 0 || run.diagnostics.long_gaps > 0 {
        log::warn!(
            "{} samples rejected, {} long gaps",
            run.diagnostics.rejected,
            run.diagnostics.long_gaps
        );
    }
    Ok(run)
}

pub fn uncertain_poses(beliefs: &[StateBelief]) -> Vec<UncertainPose> {
    beliefs
        .iter()
        .map(|b| UncertainPose {
            t: b.t,
            pose: b.state.pose,
            pos_var: b.position_variance(),
        })
        .collect()
}

pub fn map_options(cfg: &RunConfig) -> MapOptions {
    let m = &cfg.mapping;
    MapOptions {
        variant: m.variant,
        bki_length_scale: m.bki_length_scale,
        free_space: m.free_space,
        streaming_normalization: m.streaming_normalization,
        origin: Vector3::from(m.origin),
    }
}

pub fn build(cfg: &RunConfig, beliefs: &[StateBelief], samples: &[SensorSample]) -> Result<MapBuild> {
    let geo = geometry(cfg);
    let mut beams = Vec::new();
    for s in samples {
        if let Some(b) = geo.beam_from_sample(s)? {
            beams.push(b);
        }
    }
    build_map(
        &uncertain_poses(beliefs),
        &beams,
        &geo,
        &cfg.mapping.kernel,
        &map_options(cfg),
    )
}

/// Map cloud and reference cloud.
pub type CloudPair<'a> = (&'a [Vector3<f64>], &'a [Vector3<f64>]);

/// Scores a trajectory and, when given, a map cloud.
pub fn evaluate(
    cfg: &RunConfig,
    beliefs: &[StateBelief],
    truth_hf: &[TruthRecord],
    cloud: Option<CloudPair>,
) -> Result<EvalReport> {
    let truth = derive_body_velocity(truth_hf, cfg.evaluation.velocity_window)?;
    let rmse = trajectory_rmse(beliefs, &truth)?;
    let (c2c, count) = match cloud {
        Some(([], _)) => (None, Some(0)),
        Some((map, truth_pts)) => (Some(cloud_to_cloud(map, truth_pts)?), Some(map.len())),
        None => (None, None),
    };
    Ok(EvalReport {
        rmse: Some(rmse),
        cloud_to_cloud: c2c,
        occupied_cells: count,
        runtime: 0.0,
    })
}

fn read_sorted_log(path: &Path) -> Result<Vec<SensorSample>> {
    let log = io::read_sensor_log(path)?;
    if !is_time_sorted(&log.samples) {
        return Err(Error::Data(format!("{}: samples not sorted by time", path.display())));
    }
    Ok(log.samples)
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let sim = simulate(cfg)?;
    io::write_sensor_log(&out.join(SENSOR_LOG), &sim.samples)?;
    io::write_truth(&out.join(TRUTH_HF), &sim.truth_records())?;
    io::write_truth(&out.join(TRUTH_STATES), &sim.truth_at_samples())?;
    io::write_points(&out.join(TRUTH_CLOUD), &sim.truth_cloud)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &sim.samples {
        *counts.entry(s.measurement.tag()).or_default() += 1;
    }
    let mut summary = format!(
        "duration {:.2} s, {} samples",
        sim.truth.trajectory.duration(),
        sim.samples.len()
    );
    for (tag, n) in counts {
        let _ = write!(summary, "\n  {tag:<11} {n}");
    }
    Ok(summary)
}

pub fn cmd_estimate(cfg: &RunConfig, log: &Path, out: &Path) -> Result<String> {
    let samples = read_sorted_log(log)?;
    let run = estimate(cfg, &samples)?;
    io::write_trajectory(&out.join(TRAJECTORY), &run.beliefs)?;
    let o = cfg.filter_options();
    Ok(format!(
        "{} beliefs (bias estimation {}, added noise {}), {} rejected",
        run.beliefs.len(),
        if o.bias_estimation { "on" } else { "off" },
        if o.added_noise { "on" } else { "off" },
        run.diagnostics.rejected
    ))
}

pub fn cmd_map(cfg: &RunConfig, trajectory: &Path, log: &Path, out: &Path) -> Result<String> {
    let beliefs = io::read_trajectory(trajectory)?;
    let samples = read_sorted_log(log)?;
    let built = build(cfg, &beliefs, &samples)?;
    let cloud = built.grid.to_pointcloud();
    io::write_grid(&out.join(GRID), &built.grid)?;
    io::write_cloud(&out.join(CLOUD), &built.grid, &cloud)?;
    Ok(format!(
        "{:?}: {} beams integrated, {} skipped, {} cells, {} occupied",
        cfg.mapping.variant,
        built.integrated,
        built.skipped,
        built.grid.len(),
        cloud.len()
    ))
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    trajectory: &Path,
    truth_hf: &Path,
    cloud: Option<(&Path, &Path)>,
    out: &Path,
) -> Result<EvalReport> {
    let start = Instant::now();
    let beliefs = io::read_trajectory(trajectory)?;
    let truth = io::read_truth(truth_hf)?;
    let clouds = match cloud {
        Some((map, tc)) => {
            let map: Vec<_> = io::read_cloud(map)?.into_iter().map(|p| p.center).collect();
            Some((map, io::read_points(tc)?))
        }
        None => None,
    };
    let mut report = evaluate(
        cfg,
        &beliefs,
        &truth,
        clouds.as_ref().map(|(m, t)| (m.as_slice(), t.as_slice())),
    )?;
    io::write_text(&out.join(REPORT), &report.to_kv())?;
    report.runtime = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Every stage in order, each reading the previous stage's files.
pub fn cmd_all(cfg: &RunConfig, out: &Path) -> Result<EvalReport> {
    let start = Instant::now();
    // run each stage before logging: log macros skip disabled arguments
    let msg = cmd_simulate(cfg, out)?;
    info!("{msg}");
    let msg = cmd_estimate(cfg, &out.join(SENSOR_LOG), out)?;
    info!("{msg}");
    let msg = cmd_map(cfg, &out.join(TRAJECTORY), &out.join(SENSOR_LOG), out)?;
    info!("{msg}");
    let mut report = cmd_evaluate(
        cfg,
        &out.join(TRAJECTORY),
        &out.join(TRUTH_HF),
        Some((&out.join(CLOUD), &out.join(TRUTH_CLOUD))),
        out,
    )?;
    report.runtime = start.elapsed().as_secs_f64();
    Ok(report)
}

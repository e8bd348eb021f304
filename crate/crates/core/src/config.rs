//! Run configuration, read from TOML.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::bki::{KernelConfig, MapVariant};
use crate::disturbance::{BiasCalibration, DisturbanceTable};
use crate::error::{Error, Result};
use crate::eval::VELOCITY_WINDOW;
use crate::sim::Scenario;
use crate::ukf::{FilterOptions, ProcessNoise, SensorNoise, SigmaParams};

/// The checked-in default configuration.
pub const DEFAULT_TOML: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub lin_accel_std: [f64; 3],
    pub ang_accel_std: [f64; 3],
    pub bias_walk_dr_std: [f64; 3],
    pub bias_walk_imu_std: [f64; 3],
    /// calibrated bias drift rates
    pub bias_drift_dr: [f64; 3],
    pub bias_drift_imu: [f64; 3],
}

/// Initial belief spread around the scenario's start pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub pos_std: [f64; 3],
    pub att_std: [f64; 3],
    pub vel_std: [f64; 3],
    pub ang_vel_std: [f64; 3],
    pub bias_std: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub bias_estimation: bool,
    pub added_noise: bool,
    pub sigma: SigmaParams,
    pub process: ProcessConfig,
    pub sensors: SensorNoise,
    pub init: InitConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub variant: MapVariant,
    pub bki_length_scale: f64,
    pub free_space: bool,
    pub streaming_normalization: bool,
    /// DVL beam tilt off vertical, degrees
    pub dvl_tilt_deg: f64,
    pub origin: [f64; 3],
    pub kernel: KernelConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub velocity_window: f64,
    /// truth cloud sample spacing, m
    pub truth_cloud_spacing: f64,
    /// truth cloud extent beyond the path's bounding box, m
    pub truth_cloud_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scenario: Scenario,
    pub estimator: EstimatorConfig,
    pub disturbance: DisturbanceTable,
    pub mapping: MappingConfig,
    pub evaluation: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = Scenario::default();
        RunConfig {
            seed: scenario.seed,
            out_dir: PathBuf::from("out"),
            scenario,
            estimator: EstimatorConfig {
                bias_estimation: true,
                added_noise: true,
                sigma: SigmaParams::default(),
                process: ProcessConfig {
                    lin_accel_std: [0.05, 0.05, 0.02],
                    ang_accel_std: [0.01, 0.01, 0.01],
                    bias_walk_dr_std: [1e-5; 3],
                    bias_walk_imu_std: [1e-5; 3],
                    bias_drift_dr: [0.0, 0.0, 1e-4],
                    bias_drift_imu: [0.0; 3],
                },
                sensors: SensorNoise::default(),
                init: InitConfig {
                    pos_std: [0.01; 3],
                    att_std: [0.01; 3],
                    vel_std: [0.01; 3],
                    ang_vel_std: [0.01; 3],
                    bias_std: [0.001; 3],
                },
            },
            disturbance: DisturbanceTable::wave_tank(),
            mapping: MappingConfig {
                variant: MapVariant::AdaptiveBki,
                bki_length_scale: 0.15,
                free_space: false,
                streaming_normalization: false,
                dvl_tilt_deg: 22.5,
                origin: [0.0; 3],
                kernel: KernelConfig::default(),
            },
            evaluation: EvalConfig {
                velocity_window: VELOCITY_WINDOW,
                truth_cloud_spacing: 0.02,
                truth_cloud_margin: 1.0,
            },
        }
    }
}

fn positive(key: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::config(key, "must be finite and > 0"));
    }
    Ok(())
}

fn nonneg(key: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::config(key, "must be finite and >= 0"));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map_or_else(String::new, |s| {
                text.get(s)
                    .unwrap_or("")
                    .lines()
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_string()
            });
            Error::config(key, e.message().to_string())
        })?;
        let mut cfg = cfg;
        cfg.set_seed(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let e = &self.estimator;
        e.sigma.validate(crate::ukf::STATE_DIM)?;
        e.sensors.validate()?;
        let p = &e.process;
        nonneg("estimator.process.lin_accel_std", &p.lin_accel_std)?;
        nonneg("estimator.process.ang_accel_std", &p.ang_accel_std)?;
        nonneg("estimator.process.bias_walk_dr_std", &p.bias_walk_dr_std)?;
        nonneg("estimator.process.bias_walk_imu_std", &p.bias_walk_imu_std)?;
        if p.bias_drift_dr.iter().chain(&p.bias_drift_imu).any(|v| !v.is_finite()) {
            return Err(Error::config("estimator.process.bias_drift_dr", "must be finite"));
        }
        let i = &e.init;
        positive("estimator.init.pos_std", &i.pos_std)?;
        positive("estimator.init.att_std", &i.att_std)?;
        positive("estimator.init.vel_std", &i.vel_std)?;
        positive("estimator.init.ang_vel_std", &i.ang_vel_std)?;
        positive("estimator.init.bias_std", &i.bias_std)?;
        self.disturbance.validate()?;
        let m = &self.mapping;
        m.kernel.validate()?;
        positive("mapping.bki_length_scale", &[m.bki_length_scale])?;
        if !(0.0..90.0).contains(&m.dvl_tilt_deg) {
            return Err(Error::config("mapping.dvl_tilt_deg", "must lie in [0, 90)"));
        }
        if m.origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("mapping.origin", "must be finite"));
        }
        let v = &self.evaluation;
        positive("evaluation.velocity_window", &[v.velocity_window])?;
        positive("evaluation.truth_cloud_spacing", &[v.truth_cloud_spacing])?;
        nonneg("evaluation.truth_cloud_margin", &[v.truth_cloud_margin])?;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.scenario.seed = seed;
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            bias_estimation: self.estimator.bias_estimation,
            added_noise: self.estimator.added_noise,
        }
    }

    pub fn process_noise(&self) -> ProcessNoise {
        let p = &self.estimator.process;
        let mut n = ProcessNoise::from_std(
            p.lin_accel_std,
            p.ang_accel_std,
            p.bias_walk_dr_std,
            p.bias_walk_imu_std,
        );
        n.bias_mean_dr = Vector3::from(p.bias_drift_dr);
        n.bias_mean_imu = Vector3::from(p.bias_drift_imu);
        n
    }

    pub fn dr_bias_calibration(&self) -> BiasCalibration {
        let p = &self.estimator.process;
        let sq = Vector3::from(p.bias_walk_dr_std).map(|s| s * s);
        BiasCalibration {
            mu_b: Vector3::from(p.bias_drift_dr),
            walk_cov: Matrix3::from_diagonal(&sq),
        }
    }

    /// Applies a `--variant` name. Estimator names set the two ablation
    /// flags; mapper names pick the map variant.
    pub fn apply_variant(&mut self, name: &str) -> Result<()> {
        let flags = match name {
            "baseline" => Some((false, false)),
            "be_ukf" => Some((true, false)),
            "an_ukf" => Some((false, true)),
            "proposed" => Some((true, true)),
            _ => None,
        };
        if let Some((b, n)) = flags {
            self.estimator.bias_estimation = b;
            self.estimator.added_noise = n;
            return Ok(());
        }
        self.mapping.variant = name.parse().map_err(|_| {
            Error::config(
                "variant",
                format!("unknown variant '{name}' (baseline, be_ukf, an_ukf, proposed, csm, bki, adaptive_bki)"),
            )
        })?;
        Ok(())
    }
}

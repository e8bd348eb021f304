//! Beam geometry and the offline map builder.

use log::{debug, warn};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::grid::VoxelGrid;
use super::kernel::{
    adapt_lengthscale, normalize_running_variance, normalize_session_variance, KernelConfig, KernelShape,
};
use crate::error::{Error, Result};
use crate::geo::Pose;
use crate::sample::{Measurement, SensorSample, SONAR_BEAM_ID};

/// Longest allowed gap between a beam and its associated pose.
pub const MAX_POSE_GAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeamSensor {
    /// DVL transducer 0..=3.
    Dvl(u8),
    Sonar,
}

impl BeamSensor {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0..=3 => Ok(BeamSensor::Dvl(id)),
            SONAR_BEAM_ID => Ok(BeamSensor::Sonar),
            _ => Err(Error::Data(format!("unknown beam id {id}"))),
        }
    }

    pub fn id(&self) -> u8 {
        match self {
            BeamSensor::Dvl(i) => *i,
            BeamSensor::Sonar => SONAR_BEAM_ID,
        }
    }
}

/// One range return, direction in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBeam {
    pub t: f64,
    pub sensor: BeamSensor,
    pub range: f64,
    pub direction: Vector3<f64>,
}

impl RangeBeam {
    pub fn new(t: f64, sensor: BeamSensor, range: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::Data(format!("beam range {range} must be > 0")));
        }
        if (direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Data("beam direction must be unit length".into()));
        }
        if !t.is_finite() {
            return Err(Error::Data("beam timestamp not finite".into()));
        }
        Ok(RangeBeam {
            t,
            sensor,
            range,
            direction,
        })
    }
}

/// Body-frame placement of one transducer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamMount {
    pub offset: Vector3<f64>,
    pub direction: Vector3<f64>,
}

/// Mounts for DVL beams 0..=3 and the sonar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub dvl: [BeamMount; 4],
    pub sonar: BeamMount,
}

impl BeamGeometry {
    /// Janus cross: beams tilted `tilt` rad off body-down at azimuths 45° + k·90°.
    pub fn janus(tilt: f64) -> Self {
        let dvl = std::array::from_fn(|k| {
            let az = std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2;
            BeamMount {
                offset: Vector3::zeros(),
                direction: Vector3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos()),
            }
        });
        BeamGeometry {
            dvl,
            sonar: BeamMount {
                offset: Vector3::zeros(),
                direction: Vector3::z(),
            },
        }
    }

    /// Every transducer points straight down.
    pub fn vertical() -> Self {
        Self::janus(0.0)
    }

    pub fn mount(&self, sensor: BeamSensor) -> &BeamMount {
        match sensor {
            BeamSensor::Dvl(i) => &self.dvl[i as usize % 4],
            BeamSensor::Sonar => &self.sonar,
        }
    }

    /// Turns a logged range sample into a beam. Other measurement kinds give `None`.
    pub fn beam_from_sample(&self, s: &SensorSample) -> Result<Option<RangeBeam>> {
        match s.measurement {
            Measurement::RangeBeam { beam_id, range } => {
                let sensor = BeamSensor::from_id(beam_id)?;
                RangeBeam::new(s.t, sensor, range, self.mount(sensor).direction).map(Some)
            }
            _ => Ok(None),
        }
    }
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self::janus(22.5f64.to_radians())
    }
}

/// Pose with the diagonal of its position covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertainPose {
    pub t: f64,
    pub pose: Pose,
    pub pos_var: Vector3<f64>,
}

/// World point of a beam return.
pub fn beam_to_world_point(pose: &Pose, beam: &RangeBeam, offset: &Vector3<f64>) -> Vector3<f64> {
    pose.position() + pose.rotation() * (offset + beam.direction * beam.range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapVariant {
    /// Per-cell hit counting.
    Csm,
    /// Fixed isotropic sparse kernel.
    Bki,
    /// Variance-adaptive axis-decomposed kernel.
    AdaptiveBki,
}

impl std::str::FromStr for MapVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csm" => Ok(MapVariant::Csm),
            "bki" => Ok(MapVariant::Bki),
            "adaptive_bki" | "adaptive" => Ok(MapVariant::AdaptiveBki),
            _ => Err(Error::config("mapping.variant", format!("unknown variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub variant: MapVariant,
    /// Radius of the fixed kernel.
    pub bki_length_scale: f64,
    /// Add unoccupied samples along each ray.
    pub free_space: bool,
    /// Running min/max normalisation instead of whole-session.
    pub streaming_normalization: bool,
    pub origin: Vector3<f64>,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            variant: MapVariant::AdaptiveBki,
            bki_length_scale: 0.15,
            free_space: false,
            streaming_normalization: false,
            origin: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapBuild {
    pub grid: VoxelGrid,
    /// Beams with no pose close enough in time.
    pub skipped: usize,
    pub integrated: usize,
}

fn nearest_pose(traj: &[UncertainPose], t: f64) -> Option<usize> {
    let i = traj.partition_point(|p| p.t < t);
    let mut best: Option<(usize, f64)> = None;
    for j in [i.wrapping_sub(1), i] {
        if let Some(p) = traj.get(j) {
            let gap = (p.t - t).abs();
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((j, gap));
            }
        }
    }
    best.filter(|(_, g)| *g <= MAX_POSE_GAP).map(|(j, _)| j)
}

/// Builds an occupancy grid offline from a pose trajectory and range beams.
///
/// Variance normalisation runs over the whole trajectory before any beam is
/// integrated. Beams are integrated in input order; the result does not
/// depend on that order beyond floating-point summation.
pub fn build_map(
    traj: &[UncertainPose],
    beams: &[RangeBeam],
    geometry: &BeamGeometry,
    cfg: &KernelConfig,
    opts: &MapOptions,
) -> Result<MapBuild> {
    cfg.validate()?;
    if traj.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Contract("trajectory timestamps must be non-decreasing".into()));
    }
    if let MapVariant::Bki = opts.variant {
        if !(opts.bki_length_scale > 0.0) {
            return Err(Error::config("mapping.bki_length_scale", "must be > 0"));
        }
    }
    let mut grid = VoxelGrid::new(opts.origin, cfg.pitch, cfg.alpha0, cfg.beta0)?;
    let vars: Vec<_> = traj.iter().map(|p| p.pos_var).collect();
    let norm = if opts.streaming_normalization {
        normalize_running_variance(&vars)
    } else {
        normalize_session_variance(&vars)
    };
    let free_margin = cfg.l_max().max();

    let mut skipped = 0;
    let mut integrated = 0;
    for beam in beams {
        let Some(pi) = nearest_pose(traj, beam.t) else {
            skipped += 1;
            continue;
        };
        let up = &traj[pi];
        let shape = match opts.variant {
            MapVariant::Csm => KernelShape::Counting,
            MapVariant::Bki => KernelShape::Radial {
                l: opts.bki_length_scale,
            },
            MapVariant::AdaptiveBki => KernelShape::Decomposed {
                l_hat: adapt_lengthscale(&norm[pi], cfg),
            },
        };
        let sigma0 = match beam.sensor {
            BeamSensor::Dvl(_) => cfg.sigma0_dvl,
            BeamSensor::Sonar => cfg.sigma0_sonar,
        };
        let offset = geometry.mount(beam.sensor).offset;
        let hit = beam_to_world_point(&up.pose, beam, &offset);
        if !hit.iter().all(|v| v.is_finite()) {
            skipped += 1;
            continue;
        }
        grid.update(&hit, 1.0, &shape, sigma0);
        if opts.free_space {
            let start = up.pose.position() + up.pose.rotation() * offset;
            let dir = up.pose.rotation() * beam.direction;
            let mut s = cfg.pitch;
            while s < beam.range - free_margin {
                grid.update(&(start + dir * s), 0.0, &shape, sigma0);
                s += cfg.pitch;
            }
        }
        integrated += 1;
    }
    if skipped > 0 {
        warn!("{skipped} beams had no pose within {MAX_POSE_GAP} s and were skipped");
    }
    debug!("integrated {integrated} beams into {} cells", grid.len());
    Ok(MapBuild {
        grid,
        skipped,
        integrated,
    })
}

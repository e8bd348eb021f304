//! Plain-text file formats: sensor logs, trajectories, truth, maps and clouds.
//!
//! Every format is line oriented ASCII. Lines starting with `#` and blank
//! lines are ignored on read.

use log::warn;
use nalgebra::Vector3;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bki::{CellStat, CloudPoint, VoxelGrid};
use crate::error::{Error, Result};
use crate::eval::TruthRecord;
use crate::geo::{Pose, Twist};
use crate::sample::{Measurement, SensorSample};
use crate::ukf::{RobotState, StateBelief, StateMatrix, StateVector, STATE_DIM};

/// Nine significant digits.
fn sig(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Data lines as (1-based line number, whitespace-split fields).
fn data_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push((i + 1, line.split_whitespace().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn bad(path: &Path, line: usize, what: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}:{line}: {what}", path.display()))
}

fn floats(path: &Path, line: usize, fields: &[String]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let v: f64 = f
                .parse()
                .map_err(|_| bad(path, line, format!("cannot parse '{f}' as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(path, line, "non-finite value"))
            }
        })
        .collect()
}

fn expect_len(path: &Path, line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(bad(path, line, format!("expected {n} fields, found {}", fields.len())));
    }
    Ok(())
}

pub fn format_sample(s: &SensorSample) -> String {
    let mut line = format!("{} {}", sig(s.t), s.measurement.tag());
    match s.measurement {
        Measurement::Barometer { depth } => {
            let _ = write!(line, " {}", sig(depth));
        }
        Measurement::DvlVelocity(v) | Measurement::ImuGyro(v) | Measurement::DrOrientation(v) => {
            for x in v.iter() {
                let _ = write!(line, " {}", sig(*x));
            }
        }
        Measurement::RangeBeam { beam_id, range } => {
            let _ = write!(line, " {beam_id} {}", sig(range));
        }
    }
    line
}

pub fn write_sensor_log(path: &Path, samples: &[SensorSample]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "# t tag values")?;
        for s in samples {
            writeln!(w, "{}", format_sample(s))?;
        }
        Ok(())
    })
}

/// Sensor log contents plus the number of lines skipped for unknown tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLog {
    pub samples: Vec<SensorSample>,
    pub unknown: usize,
}

pub fn read_sensor_log(path: &Path) -> Result<SensorLog> {
    let mut samples = Vec::new();
    let mut unknown = 0;
    for (ln, f) in data_lines(path)? {
        if f.len() < 2 {
            return Err(bad(path, ln, "expected 't tag values'"));
        }
        let t = floats(path, ln, &f[..1])?[0];
        let vals = &f[2..];
        let v3 = |vals: &[String]| -> Result<Vector3<f64>> {
            expect_len(path, ln, vals, 3)?;
            Ok(Vector3::from_vec(floats(path, ln, vals)?))
        };
        let m = match f[1].as_str() {
            "barometer" => {
                expect_len(path, ln, vals, 1)?;
                Measurement::Barometer {
                    depth: floats(path, ln, vals)?[0],
                }
            }
            "dvl_vel" => Measurement::DvlVelocity(v3(vals)?),
            "imu_gyro" => Measurement::ImuGyro(v3(vals)?),
            "dr_orient" => Measurement::DrOrientation(v3(vals)?),
            "range_beam" => {
                expect_len(path, ln, vals, 2)?;
                let beam_id: u8 = vals[0]
                    .parse()
                    .map_err(|_| bad(path, ln, "beam id must be an integer 0-255"))?;
                Measurement::RangeBeam {
                    beam_id,
                    range: floats(path, ln, &vals[1..])?[0],
                }
            }
            other => {
                warn!("{}:{ln}: unknown tag '{other}' skipped", path.display());
                unknown += 1;
                continue;
            }
        };
        samples.push(SensorSample::new(t, m));
    }
    Ok(SensorLog { samples, unknown })
}

/// One line per belief: `t`, the 18 mean entries, then the lower triangle
/// of the covariance row by row.
pub fn write_trajectory(path: &Path, beliefs: &[StateBelief]) -> Result<()> {
    write_file(path, |w| {
        writeln!(
            w,
            "# t mean[{STATE_DIM}] cov_lower[{}]",
            STATE_DIM * (STATE_DIM + 1) / 2
        )?;
        for b in beliefs {
            let mut line = sig(b.t);
            for x in b.mean().iter() {
                line.push(' ');
                line.push_str(&sig(*x));
            }
            for i in 0..STATE_DIM {
                for j in 0..=i {
                    line.push(' ');
                    line.push_str(&sig(b.cov[(i, j)]));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    })
}

pub fn read_trajectory(path: &Path) -> Result<Vec<StateBelief>> {
    let n = 1 + STATE_DIM + STATE_DIM * (STATE_DIM + 1) / 2;
    data_lines(path)?
        .into_iter()
        .map(|(ln, f)| {
            expect_len(path, ln, &f, n)?;
            let v = floats(path, ln, &f)?;
            let mean = StateVector::from_column_slice(&v[1..=STATE_DIM]);
            let mut cov = StateMatrix::zeros();
            let mut k = 1 + STATE_DIM;
            for i in 0..STATE_DIM {
                for j in 0..=i {
                    cov[(i, j)] = v[k];
                    cov[(j, i)] = v[k];
                    k += 1;
                }
            }
            Ok(StateBelief {
                state: RobotState::from_vector(&mean),
                cov,
                t: v[0],
            })
        })
        .collect()
}

/// `t x y z phi theta psi u v w`, velocities in the body frame.
pub fn write_truth(path: &Path, records: &[TruthRecord]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "# t x y z phi theta psi u v w")?;
        for r in records {
            let p = r.pose.to_array();
            let fields: Vec<String> = [
                r.t,
                p[0],
                p[1],
                p[2],
                p[3],
                p[4],
                p[5],
                r.vel_body.x,
                r.vel_body.y,
                r.vel_body.z,
            ]
            .iter()
            .map(|x| sig(*x))
            .collect();
            writeln!(w, "{}", fields.join(" "))?;
        }
        Ok(())
    })
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    data_lines(path)?
        .into_iter()
        .map(|(ln, f)| {
            expect_len(path, ln, &f, 10)?;
            let v = floats(path, ln, &f)?;
            Ok(TruthRecord {
                t: v[0],
                pose: Pose::from_array([v[1], v[2], v[3], v[4], v[5], v[6]]),
                vel_body: Vector3::new(v[7], v[8], v[9]),
            })
        })
        .collect()
}

pub fn truth_record(t: f64, pose: Pose, twist: &Twist) -> TruthRecord {
    TruthRecord {
        t,
        pose,
        vel_body: twist.linear(),
    }
}

fn grid_header(grid: &VoxelGrid) -> String {
    let o = grid.origin();
    format!("# pitch {:e} origin {:e} {:e} {:e}", grid.pitch(), o.x, o.y, o.z)
}

/// Occupied cells, `x y z mean variance` with six decimals.
pub fn write_cloud(path: &Path, grid: &VoxelGrid, cloud: &[CloudPoint]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "{}", grid_header(grid))?;
        for p in cloud {
            writeln!(
                w,
                "{:.6} {:.6} {:.6} {:.6} {:.6}",
                p.center.x, p.center.y, p.center.z, p.mean, p.variance
            )?;
        }
        Ok(())
    })
}

pub fn read_cloud(path: &Path) -> Result<Vec<CloudPoint>> {
    data_lines(path)?
        .into_iter()
        .map(|(ln, f)| {
            expect_len(path, ln, &f, 5)?;
            let v = floats(path, ln, &f)?;
            Ok(CloudPoint {
                center: Vector3::new(v[0], v[1], v[2]),
                mean: v[3],
                variance: v[4],
            })
        })
        .collect()
}

/// Every stored cell, `i j k alpha beta`, concentrations in round-trip precision.
pub fn write_grid(path: &Path, grid: &VoxelGrid) -> Result<()> {
    let prior = grid.prior();
    write_file(path, |w| {
        writeln!(w, "{} prior {:e} {:e}", grid_header(grid), prior.alpha, prior.beta)?;
        for (k, c) in grid.cells_sorted() {
            writeln!(w, "{} {} {} {:e} {:e}", k[0], k[1], k[2], c.alpha, c.beta)?;
        }
        Ok(())
    })
}

pub fn read_grid(path: &Path) -> Result<VoxelGrid> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let first = BufReader::new(f)
        .lines()
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| bad(path, 1, "empty grid file"))?;
    let h: Vec<&str> = first.split_whitespace().collect();
    if h.len() != 10 || h[0] != "#" || h[1] != "pitch" || h[3] != "origin" || h[7] != "prior" {
        return Err(bad(path, 1, "expected '# pitch P origin X Y Z prior A B'"));
    }
    let hv: Vec<String> = [h[2], h[4], h[5], h[6], h[8], h[9]]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let hv = floats(path, 1, &hv)?;
    let mut grid = VoxelGrid::new(Vector3::new(hv[1], hv[2], hv[3]), hv[0], hv[4], hv[5])?;
    for (ln, f) in data_lines(path)? {
        expect_len(path, ln, &f, 5)?;
        let mut idx = [0i64; 3];
        for j in 0..3 {
            idx[j] = f[j]
                .parse()
                .map_err(|_| bad(path, ln, "cell index must be an integer"))?;
        }
        let ab = floats(path, ln, &f[3..])?;
        grid.set_cell(
            idx,
            CellStat {
                alpha: ab[0],
                beta: ab[1],
            },
        )
        .map_err(|e| bad(path, ln, e))?;
    }
    Ok(grid)
}

/// Points only, `x y z` per line.
pub fn write_points(path: &Path, points: &[Vector3<f64>]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "# x y z")?;
        for p in points {
            writeln!(w, "{:.6} {:.6} {:.6}", p.x, p.y, p.z)?;
        }
        Ok(())
    })
}

pub fn read_points(path: &Path) -> Result<Vec<Vector3<f64>>> {
    data_lines(path)?
        .into_iter()
        .map(|(ln, f)| {
            if f.len() < 3 {
                return Err(bad(path, ln, "expected at least 3 fields"));
            }
            let v = floats(path, ln, &f[..3])?;
            Ok(Vector3::new(v[0], v[1], v[2]))
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, |w| w.write_all(text.as_bytes()))
}

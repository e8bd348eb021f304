//! Sparse voxel grid of Beta concentration pairs.

use nalgebra::Vector3;
use std::collections::HashMap;

use super::kernel::KernelShape;
use crate::error::{Error, Result};

pub type CellIndex = [i64; 3];

/// Beta concentration pair of one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStat {
    pub alpha: f64,
    pub beta: f64,
}

impl CellStat {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

/// One exported occupied voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub center: Vector3<f64>,
    pub mean: f64,
    pub variance: f64,
}

/// World-anchored sparse occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vector3<f64>,
    pitch: f64,
    prior: CellStat,
    cells: HashMap<CellIndex, CellStat>,
}

impl VoxelGrid {
    pub fn new(origin: Vector3<f64>, pitch: f64, alpha0: f64, beta0: f64) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::config("mapping.kernel.pitch", "must be > 0"));
        }
        if !(alpha0 > 0.0 && beta0 > 0.0) {
            return Err(Error::config("mapping.kernel.alpha0", "priors must be > 0"));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::config("mapping.origin", "must be finite"));
        }
        Ok(VoxelGrid {
            origin,
            pitch,
            prior: CellStat {
                alpha: alpha0,
                beta: beta0,
            },
            cells: HashMap::new(),
        })
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn prior(&self) -> CellStat {
        self.prior
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, p: &Vector3<f64>) -> CellIndex {
        let r = (p - self.origin) / self.pitch;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    pub fn center(&self, idx: CellIndex) -> Vector3<f64> {
        self.origin + Vector3::new(idx[0] as f64 + 0.5, idx[1] as f64 + 0.5, idx[2] as f64 + 0.5) * self.pitch
    }

    /// Stored statistics, or the prior for untouched cells.
    pub fn cell(&self, idx: CellIndex) -> CellStat {
        self.cells.get(&idx).copied().unwrap_or(self.prior)
    }

    /// Mean occupancy and its variance.
    pub fn query_cell(&self, idx: CellIndex) -> (f64, f64) {
        let c = self.cell(idx);
        (c.mean(), c.variance())
    }

    /// Cells in ascending index order.
    pub fn cells_sorted(&self) -> Vec<(CellIndex, CellStat)> {
        let mut v: Vec<_> = self.cells.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }

    /// Directly sets one cell. Concentrations must not drop below the prior.
    pub fn set_cell(&mut self, idx: CellIndex, stat: CellStat) -> Result<()> {
        if !(stat.alpha >= self.prior.alpha && stat.beta >= self.prior.beta)
            || !stat.alpha.is_finite()
            || !stat.beta.is_finite()
        {
            return Err(Error::Data(format!("cell {idx:?} below prior or non-finite")));
        }
        self.cells.insert(idx, stat);
        Ok(())
    }

    /// Spreads one labelled observation at `point`.
    ///
    /// The observation is placed at the centre of the cell containing it,
    /// then every cell whose centre lies inside the kernel support gains
    /// `k*y` in alpha and `k*(1-y)` in beta. Returns the touched-cell count.
    pub fn update(&mut self, point: &Vector3<f64>, y: f64, shape: &KernelShape, sigma0: f64) -> usize {
        debug_assert!(y == 0.0 || y == 1.0);
        let hit = self.index_of(point);
        let reach = shape.reach();
        let r: [i64; 3] = std::array::from_fn(|j| (reach[j] / self.pitch).ceil() as i64);
        let mut touched = 0;
        for di in -r[0]..=r[0] {
            for dj in -r[1]..=r[1] {
                for dk in -r[2]..=r[2] {
                    let delta = Vector3::new(di as f64, dj as f64, dk as f64) * self.pitch;
                    let k = shape.weight(&delta, sigma0);
                    if k <= 0.0 {
                        continue;
                    }
                    let idx = [hit[0] + di, hit[1] + dj, hit[2] + dk];
                    let c = self.cells.entry(idx).or_insert(self.prior);
                    c.alpha += k * y;
                    c.beta += k * (1.0 - y);
                    touched += 1;
                }
            }
        }
        touched
    }

    /// Cells with mean occupancy strictly above one half.
    pub fn to_pointcloud(&self) -> Vec<CloudPoint> {
        self.cells_sorted()
            .into_iter()
            .filter(|(_, c)| c.mean() > 0.5)
            .map(|(k, c)| CloudPoint {
                center: self.center(k),
                mean: c.mean(),
                variance: c.variance(),
            })
            .collect()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.values().filter(|c| c.mean() > 0.5).count()
    }
}

pub fn map_to_pointcloud(grid: &VoxelGrid) -> Vec<CloudPoint> {
    grid.to_pointcloud()
}

pub fn query_cell(grid: &VoxelGrid, idx: CellIndex) -> (f64, f64) {
    grid.query_cell(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> VoxelGrid {
        VoxelGrid::new(Vector3::zeros(), 0.1, 1e-10, 1e-10).unwrap()
    }

    #[test]
    fn beta_moments() {
        let c = CellStat { alpha: 1.0, beta: 1.0 };
        assert_eq!(c.mean(), 0.5);
        assert!((c.variance() - 1.0 / 12.0).abs() < 1e-15);
        let c = CellStat { alpha: 9.0, beta: 1.0 };
        assert!((c.mean() - 0.9).abs() < 1e-15);
        assert!((c.variance() - 9.0 / 1100.0).abs() < 1e-15);
        let (m, v) = grid().query_cell([3, -2, 7]);
        assert_eq!(m, 0.5);
        assert!((v - 0.25).abs() < 1e-9);
    }

    #[test]
    fn centres_and_indices() {
        let g = VoxelGrid::new(Vector3::new(1.0, -1.0, 0.5), 0.2, 1.0, 1.0).unwrap();
        let c = g.center([0, 1, -1]);
        assert!((c - Vector3::new(1.1, -0.7, 0.4)).norm() < 1e-12);
        assert_eq!(g.index_of(&c), [0, 1, -1]);
        assert!(VoxelGrid::new(Vector3::zeros(), 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sub_pitch_kernel_touches_one_cell() {
        let mut g = grid();
        let shape = KernelShape::Decomposed {
            l_hat: Vector3::new(0.09, 0.09, 0.05),
        };
        let n = g.update(&Vector3::new(0.199, 0.0001, 0.05), 1.0, &shape, 0.9);
        assert_eq!(n, 1);
        let c = g.cell([1, 0, 0]);
        assert!((c.alpha - 0.9 - 1e-10).abs() < 1e-15);
        assert_eq!(c.beta, 1e-10);
    }

    #[test]
    fn touched_cells_bounded_by_box() {
        let mut g = grid();
        let l = Vector3::new(0.18, 0.18, 0.08);
        let n = g.update(
            &Vector3::new(0.33, 0.47, -0.21),
            1.0,
            &KernelShape::Decomposed { l_hat: l },
            0.9,
        );
        let bound: i64 = (0..3).map(|j| 2 * (l[j] / 0.1f64).ceil() as i64 + 1).product();
        assert!(n as i64 <= bound);
        // x/y offsets -1..=1, z offset 0 only
        assert_eq!(n, 9);
    }

    #[test]
    fn free_label_feeds_beta() {
        let mut g = grid();
        g.update(&Vector3::new(0.05, 0.05, 0.05), 0.0, &KernelShape::Counting, 1.0);
        let c = g.cell([0, 0, 0]);
        assert!((c.beta - 1.0).abs() < 1e-9);
        assert!(g.to_pointcloud().is_empty());
    }

    #[test]
    fn cloud_threshold_is_strict() {
        let mut g = grid();
        assert!(g.to_pointcloud().is_empty());
        g.set_cell([0, 0, 0], CellStat { alpha: 9.0, beta: 1.0 }).unwrap();
        g.set_cell([1, 0, 0], CellStat { alpha: 2.0, beta: 2.0 }).unwrap();
        let cloud = g.to_pointcloud();
        assert_eq!(cloud.len(), 1);
        assert!((cloud[0].mean - 0.9).abs() < 1e-15);
        assert_eq!(g.occupied_count(), 1);
        assert!(g.set_cell([0, 0, 0], CellStat { alpha: 0.0, beta: 1.0 }).is_err());
    }

    #[test]
    fn variance_shrinks_with_hits() {
        let mut g = grid();
        let shape = KernelShape::Radial { l: 0.15 };
        let p = Vector3::new(0.05, 0.05, 0.05);
        let mut prev = g.query_cell([0, 0, 0]).1;
        for _ in 0..50 {
            g.update(&p, 1.0, &shape, 0.6);
            let (m, v) = g.query_cell([0, 0, 0]);
            assert!((0.0..=1.0).contains(&m));
            assert!(v <= prev + 1e-15 && v <= 0.25);
            prev = v;
        }
    }
}

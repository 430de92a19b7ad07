//! Metric voxel grids, spatial encoding of kernels and channel fusion.

mod encode;
mod io;

pub use encode::{arrival_time, encode_kernel, encode_kernel_envelope, fuse_max, fuse_product, grid_argmax};
pub use io::{read_field_csv, read_pkvx, read_pkvx_from, write_field_csv, write_pgm_slices, write_pkvx, write_pkvx_to, SliceNormalization};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{to_array, vec3, Vec3};

/// Upper bound on voxels per channel accepted from configs and files.
pub const MAX_VOXELS: usize = 1 << 28;

/// Regular lattice; voxel `(i, j, k)` is centered at
/// `origin + cell_m * (i + ½, j + ½, k + ½)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid {
    origin: Vec3,
    cell_m: f64,
    dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: Vec3, cell_m: f64, dims: [usize; 3]) -> Result<Self> {
        if !(cell_m.is_finite() && cell_m > 0.0) {
            return Err(invalid(format!("cell size must be positive, got {cell_m}")));
        }
        if dims.contains(&0) {
            return Err(invalid(format!("grid dims must be positive, got {dims:?}")));
        }
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if count.is_none_or(|c| c > MAX_VOXELS) {
            return Err(invalid(format!("grid {dims:?} exceeds {MAX_VOXELS} voxels")));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(invalid("grid origin must be finite"));
        }
        Ok(Self { origin, cell_m, dims })
    }

    /// 70×70×50 voxels of 5 cm: a 3.5 m × 3.5 m × 2.5 m capture volume.
    pub fn capture_volume(origin: Vec3) -> Self {
        Self::new(origin, 0.05, [70, 70, 50]).expect("static grid is valid")
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn cell_m(&self) -> f64 {
        self.cell_m
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent_m(&self) -> Vec3 {
        Vec3::new(
            self.dims[0] as f64 * self.cell_m,
            self.dims[1] as f64 * self.cell_m,
            self.dims[2] as f64 * self.cell_m,
        )
    }

    pub fn cell_diagonal_m(&self) -> f64 {
        self.cell_m * 3f64.sqrt()
    }

    pub fn center(&self, idx: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                (idx[0] as f64 + 0.5) * self.cell_m,
                (idx[1] as f64 + 0.5) * self.cell_m,
                (idx[2] as f64 + 0.5) * self.cell_m,
            )
    }

    /// Linear index, x fastest.
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]
    }

    pub fn unravel(&self, lin: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [lin % nx, (lin / nx) % ny, lin / (nx * ny)]
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn locate(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut idx = [0; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.cell_m).floor();
            if f < 0.0 || f >= self.dims[a] as f64 {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    /// Voxel centers in linear order.
    pub fn centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.len()).map(move |l| self.center(self.unravel(l)))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            origin: to_array(&self.origin),
            cell_m: self.cell_m,
            dims: self.dims,
        }
    }
}

/// Serializable grid description used in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub cell_m: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<VoxelGrid> {
        VoxelGrid::new(vec3(self.origin), self.cell_m, self.dims)
    }
}

/// What a kernel-derived field was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelSignal {
    Raw,
    Envelope,
}

/// `C` scalar channels over a grid, stored channel-major then x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelField {
    grid: VoxelGrid,
    channels: usize,
    values: Vec<f64>,
    kernel_signal: Option<KernelSignal>,
}

impl VoxelField {
    pub fn new(grid: VoxelGrid, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(invalid("a field needs at least one channel"));
        }
        if values.len() != channels * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {channels} channels of {} voxels",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("field value {i} is not finite")));
        }
        Ok(Self {
            grid,
            channels,
            values,
            kernel_signal: None,
        })
    }

    pub fn zeros(grid: VoxelGrid, channels: usize) -> Self {
        Self::new(grid, channels.max(1), vec![0.0; channels.max(1) * grid.len()]).expect("zeros are valid")
    }

    pub fn filled(grid: VoxelGrid, channels: usize, value: f64) -> Result<Self> {
        Self::new(grid, channels, vec![value; channels * grid.len()])
    }

    /// Single channel built from a function of the voxel center.
    pub fn from_fn(grid: VoxelGrid, f: impl Fn(Vec3) -> f64) -> Result<Self> {
        Self::new(grid, 1, grid.centers().map(f).collect())
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, idx: [usize; 3]) -> f64 {
        self.values[c * self.grid.len() + self.grid.linear(idx)]
    }

    pub fn kernel_signal(&self) -> Option<KernelSignal> {
        self.kernel_signal
    }

    pub fn with_kernel_signal(mut self, signal: Option<KernelSignal>) -> Self {
        self.kernel_signal = signal;
        self
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Scales so the largest absolute value becomes 1; all-zero fields are
    /// returned unchanged.
    pub fn peak_normalized(&self) -> VoxelField {
        let peak = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = self.clone();
        if peak > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= peak);
        }
        out
    }

    /// Channels stacked in order; all inputs must share a grid.
    pub fn concat(fields: &[&VoxelField]) -> Result<VoxelField> {
        let first = fields.first().ok_or_else(|| invalid("nothing to concatenate"))?;
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(Error::GridMismatch);
        }
        let values: Vec<f64> = fields.iter().flat_map(|f| f.values.iter().copied()).collect();
        VoxelField::new(first.grid, fields.iter().map(|f| f.channels).sum(), values)
    }

    pub fn select_channel(&self, c: usize) -> Result<VoxelField> {
        if c >= self.channels {
            return Err(invalid(format!("channel {c} of {}", self.channels)));
        }
        Ok(VoxelField::new(self.grid, 1, self.channel(c).to_vec())?.with_kernel_signal(self.kernel_signal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = VoxelGrid::new(Vec3::new(1.0, -2.0, 0.5), 0.1, [4, 3, 2]).unwrap();
        for lin in 0..g.len() {
            assert_eq!(g.linear(g.unravel(lin)), lin);
            assert_eq!(g.locate(&g.center(g.unravel(lin))), Some(g.unravel(lin)));
        }
        assert_eq!(g.linear([1, 0, 0]), 1);
        assert_eq!(g.linear([0, 1, 0]), 4);
        let c = g.center([0, 0, 0]);
        assert!((c - Vec3::new(1.05, -1.95, 0.55)).norm() < 1e-12);
        assert_eq!(g.locate(&Vec3::new(0.99, -1.9, 0.6)), None);
    }

    #[test]
    fn invalid_grids() {
        assert!(VoxelGrid::new(Vec3::zeros(), 0.0, [1, 1, 1]).is_err());
        assert!(VoxelGrid::new(Vec3::zeros(), 0.1, [0, 1, 1]).is_err());
        assert!(VoxelGrid::new(Vec3::zeros(), 0.1, [1 << 10, 1 << 10, 1 << 9]).is_err());
        let g = VoxelGrid::capture_volume(Vec3::zeros());
        assert!((g.extent_m() - Vec3::new(3.5, 3.5, 2.5)).norm() < 1e-12);
    }

    #[test]
    fn field_shape_checks() {
        let g = VoxelGrid::new(Vec3::zeros(), 1.0, [2, 2, 2]).unwrap();
        assert!(VoxelField::new(g, 1, vec![0.0; 7]).is_err());
        assert!(VoxelField::new(g, 0, vec![]).is_err());
        assert!(VoxelField::new(g, 1, vec![f64::NAN; 8]).is_err());
        let a = VoxelField::filled(g, 1, 1.0).unwrap();
        let b = VoxelField::filled(g, 2, 2.0).unwrap();
        let c = VoxelField::concat(&[&a, &b]).unwrap();
        assert_eq!(c.channels(), 3);
        assert_eq!(c.channel(2), &[2.0; 8]);
    }
}

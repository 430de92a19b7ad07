use crate::error::{Error, Result};
use crate::voxel::{VoxelField, VoxelGrid};

/// `channels × nz × ny × nx` activations, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    channels: usize,
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(channels: usize, dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * dims.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {channels} channels of {dims:?}",
                data.len()
            )));
        }
        Ok(Self { channels, dims, data })
    }

    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        Self {
            channels,
            dims,
            data: vec![0.0; channels * dims.iter().product::<usize>()],
        }
    }

    pub fn from_field(field: &VoxelField) -> Self {
        Self {
            channels: field.channels(),
            dims: field.grid().dims(),
            data: field.values().to_vec(),
        }
    }

    pub fn to_field(&self, grid: &VoxelGrid) -> Result<VoxelField> {
        if grid.dims() != self.dims {
            return Err(Error::GridMismatch);
        }
        VoxelField::new(*grid, self.channels, self.data.clone())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.voxels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.voxels();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Channel-wise concatenation.
    pub fn concat(parts: &[&Tensor4]) -> Result<Tensor4> {
        let dims = parts.first().map(|t| t.dims).unwrap_or([0; 3]);
        if parts.iter().any(|t| t.dims != dims) {
            return Err(Error::ShapeMismatch("concatenating tensors of different dims".into()));
        }
        Ok(Tensor4 {
            channels: parts.iter().map(|t| t.channels).sum(),
            dims,
            data: parts.iter().flat_map(|t| t.data.iter().copied()).collect(),
        })
    }

    /// Channels `[start, start + count)` as a new tensor.
    pub fn slice_channels(&self, start: usize, count: usize) -> Tensor4 {
        let n = self.voxels();
        Tensor4 {
            channels: count,
            dims: self.dims,
            data: self.data[start * n..(start + count) * n].to_vec(),
        }
    }
}

use crate::error::{invalid, Result};
use crate::geometry::Vec3;
use crate::voxel::{grid_argmax, VoxelField, VoxelGrid};

/// One isotropic Gaussian per landmark, evaluated at voxel centers.
pub fn make_target(landmarks: &[Vec3], grid: &VoxelGrid, sigma_m: f64) -> Result<VoxelField> {
    if !(sigma_m > 0.0 && sigma_m.is_finite()) {
        return Err(invalid(format!("target sigma must be positive, got {sigma_m}")));
    }
    let denom = 2.0 * sigma_m * sigma_m;
    let mut values = Vec::with_capacity(grid.len() * landmarks.len());
    for p in landmarks {
        values.extend(grid.centers().map(|c| (-(c - p).norm_squared() / denom).exp()));
    }
    VoxelField::new(*grid, landmarks.len(), values)
}

/// Clamps every channel to `[0, 1]` and returns each channel's argmax center.
pub fn readout(pred: &VoxelField) -> Vec<Vec3> {
    let clamped = VoxelField::new(
        *pred.grid(),
        pred.channels(),
        pred.values().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )
    .expect("same shape");
    (0..clamped.channels())
        .map(|c| grid_argmax(&clamped, c).expect("channel in range").1)
        .collect()
}

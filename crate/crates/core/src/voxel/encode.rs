use super::{KernelSignal, VoxelField, VoxelGrid};
use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;
use crate::kernel::envelope;
use crate::roomsim::ImpulseResponse;

/// Time of flight speaker → `x` → microphone.
pub fn arrival_time(x: &Vec3, spk: &Vec3, mic: &Vec3, speed_mps: f64) -> f64 {
    ((spk - x).norm() + (mic - x).norm()) / speed_mps
}

/// Linear interpolation of the taps at fractional position `pos`; zero
/// before tap 0 and after the last tap.
fn sample_at(taps: &[f64], pos: f64) -> f64 {
    if !(pos >= 0.0) || pos > (taps.len() - 1) as f64 {
        return 0.0;
    }
    let n = pos.floor() as usize;
    let frac = pos - n as f64;
    let next = taps.get(n + 1).copied().unwrap_or(0.0);
    if frac == 0.0 {
        taps[n]
    } else {
        taps[n] * (1.0 - frac) + next * frac
    }
}

/// Spatial encoding: every voxel center takes the kernel's value at its
/// arrival time, so each tap spreads over an ellipsoidal shell whose foci
/// are the speaker and the microphone.
pub fn encode_kernel(k: &ImpulseResponse, spk: &Vec3, mic: &Vec3, speed_mps: f64, grid: &VoxelGrid) -> Result<VoxelField> {
    if k.is_empty() {
        return Err(invalid("cannot encode an empty kernel"));
    }
    if !(speed_mps > 0.0) {
        return Err(invalid(format!("speed of sound must be positive, got {speed_mps}")));
    }
    let fs = k.sample_rate_hz();
    let taps = k.taps();
    let values = grid
        .centers()
        .map(|x| sample_at(taps, arrival_time(&x, spk, mic, speed_mps) * fs))
        .collect();
    Ok(VoxelField::new(*grid, 1, values)?.with_kernel_signal(Some(KernelSignal::Raw)))
}

/// [`encode_kernel`] applied to the analytic envelope of `k`.
pub fn encode_kernel_envelope(
    k: &ImpulseResponse,
    spk: &Vec3,
    mic: &Vec3,
    speed_mps: f64,
    grid: &VoxelGrid,
) -> Result<VoxelField> {
    Ok(encode_kernel(&envelope(k)?, spk, mic, speed_mps, grid)?.with_kernel_signal(Some(KernelSignal::Envelope)))
}

fn fuse(fields: &[VoxelField], op: impl Fn(f64, f64) -> Result<f64>) -> Result<VoxelField> {
    let first = fields.first().ok_or_else(|| invalid("nothing to fuse"))?;
    if fields.iter().any(|f| f.grid() != first.grid()) {
        return Err(Error::GridMismatch);
    }
    if fields.iter().any(|f| f.channels() != 1) {
        return Err(Error::ShapeMismatch("fusion expects single-channel fields".into()));
    }
    let mut values = first.values().to_vec();
    for f in &fields[1..] {
        for (acc, v) in values.iter_mut().zip(f.values()) {
            *acc = op(*acc, *v)?;
        }
    }
    let signal = first.kernel_signal();
    let signal = fields.iter().all(|f| f.kernel_signal() == signal).then_some(signal).flatten();
    Ok(VoxelField::new(*first.grid(), 1, values)?.with_kernel_signal(signal))
}

/// Element-wise maximum across fields.
pub fn fuse_max(fields: &[VoxelField]) -> Result<VoxelField> {
    fuse(fields, |a, b| Ok(a.max(b)))
}

/// Element-wise product of nonnegative fields.
pub fn fuse_product(fields: &[VoxelField]) -> Result<VoxelField> {
    if let Some(v) = fields.iter().flat_map(|f| f.values()).find(|v| **v < 0.0) {
        return Err(Error::NegativeValue(*v));
    }
    fuse(fields, |a, b| Ok(a * b))
}

/// Maximum of one channel: grid index and voxel center. Ties resolve to the
/// lowest linear index.
pub fn grid_argmax(field: &VoxelField, channel: usize) -> Result<([usize; 3], Vec3)> {
    if channel >= field.channels() {
        return Err(invalid(format!("channel {channel} of {}", field.channels())));
    }
    let values = field.channel(channel);
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let idx = field.grid().unravel(best);
    Ok((idx, field.grid().center(idx)))
}

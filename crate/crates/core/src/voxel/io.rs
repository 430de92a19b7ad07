//! PKVX binary fields, CSV dumps and PGM slice export.
//!
//! PKVX layout, little-endian: `b"PKVX"`, version `u32`, dims `3 × u32`,
//! origin `3 × f64`, cell size `f64`, channel count `u32`, then
//! `channels × nx·ny·nz` `f32` values, channel-major and x fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{VoxelField, VoxelGrid, MAX_VOXELS};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const MAGIC: &[u8; 4] = b"PKVX";
const VERSION: u32 = 1;

fn corrupt(reason: impl Into<String>) -> Error {
    Error::Corrupt {
        format: "PKVX",
        reason: reason.into(),
    }
}

pub fn write_pkvx(path: impl AsRef<Path>, field: &VoxelField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pkvx_to(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn write_pkvx_to<W: Write>(mut w: W, field: &VoxelField) -> Result<()> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in grid.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for c in grid.origin().iter() {
        w.write_all(&c.to_le_bytes())?;
    }
    w.write_all(&grid.cell_m().to_le_bytes())?;
    w.write_all(&(field.channels() as u32).to_le_bytes())?;
    for v in field.values() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_pkvx(path: impl AsRef<Path>) -> Result<VoxelField> {
    read_pkvx_from(BufReader::new(File::open(path)?))
}

pub fn read_pkvx_from<R: Read>(mut r: R) -> Result<VoxelField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated header"))?;
    if &magic != MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let dims = [read_u32(&mut r)? as usize, read_u32(&mut r)? as usize, read_u32(&mut r)? as usize];
    let origin = Vec3::new(read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
    let cell = read_f64(&mut r)?;
    let channels = read_u32(&mut r)? as usize;
    let grid = VoxelGrid::new(origin, cell, dims).map_err(|e| corrupt(e.to_string()))?;
    if channels == 0 || channels.saturating_mul(grid.len()) > MAX_VOXELS * 64 {
        return Err(corrupt(format!("implausible channel count {channels}")));
    }
    let mut bytes = vec![0u8; channels * grid.len() * 4];
    r.read_exact(&mut bytes).map_err(|_| corrupt("truncated payload"))?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    VoxelField::new(grid, channels, values).map_err(|e| corrupt(e.to_string()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated header"))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated header"))?;
    Ok(f64::from_le_bytes(b))
}

/// Writes `channel,i,j,k,x,y,z,value` rows in storage order. Values are
/// written at `f32` precision, matching PKVX.
pub fn write_field_csv(path: impl AsRef<Path>, field: &VoxelField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "channel,i,j,k,x,y,z,value")?;
    let grid = field.grid();
    for c in 0..field.channels() {
        for (lin, v) in field.channel(c).iter().enumerate() {
            let idx = grid.unravel(lin);
            let p = grid.center(idx);
            writeln!(w, "{c},{},{},{},{},{},{},{}", idx[0], idx[1], idx[2], p.x, p.y, p.z, *v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads values written by [`write_field_csv`] back onto `grid`.
pub fn read_field_csv(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<VoxelField> {
    let bad = |line: usize, why: &str| Error::Corrupt {
        format: "CSV",
        reason: format!("line {line}: {why}"),
    };
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (n, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad(n + 1, "expected 8 columns"));
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(n + 1, "bad index"));
        let idx = [num(cols[1])?, num(cols[2])?, num(cols[3])?];
        if (0..3).any(|a| idx[a] >= grid.dims()[a]) {
            return Err(bad(n + 1, "index outside grid"));
        }
        let value = cols[7].trim().parse::<f64>().map_err(|_| bad(n + 1, "bad value"))?;
        rows.push((num(cols[0])?, grid.linear(idx), value));
    }
    let channels = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let mut values = vec![0.0; channels * grid.len()];
    for (c, lin, v) in rows {
        values[c * grid.len() + lin] = v;
    }
    VoxelField::new(*grid, channels, values)
}

/// Min-max constants applied to a PGM export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceNormalization {
    pub channel: usize,
    pub min: f64,
    pub max: f64,
}

impl SliceNormalization {
    /// Maps a field value onto 0..=255.
    pub fn to_gray(&self, v: f64) -> u8 {
        if self.max > self.min {
            (((v - self.min) / (self.max - self.min)) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }
}

/// One binary PGM (P5) per z-slice of `channel`, named
/// `{prefix}_z{k:03}.pgm`, rows along y and columns along x. The whole
/// channel shares one min-max normalization, which is returned.
pub fn write_pgm_slices(
    field: &VoxelField,
    channel: usize,
    dir: impl AsRef<Path>,
    prefix: &str,
) -> Result<(SliceNormalization, Vec<PathBuf>)> {
    if channel >= field.channels() {
        return Err(Error::InvalidArgument(format!("channel {channel} of {}", field.channels())));
    }
    let values = field.channel(channel);
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let norm = SliceNormalization { channel, min, max };
    let [nx, ny, nz] = field.grid().dims();
    let mut paths = Vec::with_capacity(nz);
    for k in 0..nz {
        let path = dir.as_ref().join(format!("{prefix}_z{k:03}.pgm"));
        let mut w = BufWriter::new(File::create(&path)?);
        write!(w, "P5\n{nx} {ny}\n255\n")?;
        let slab = &values[k * nx * ny..(k + 1) * nx * ny];
        let bytes: Vec<u8> = slab.iter().map(|v| norm.to_gray(*v)).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        paths.push(path);
    }
    Ok((norm, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn field() -> VoxelField {
        let g = VoxelGrid::new(Vec3::new(0.5, -1.0, 2.0), 0.25, [3, 2, 2]).unwrap();
        VoxelField::new(g, 2, (0..24).map(|i| i as f64 * 0.5 - 3.0).collect()).unwrap()
    }

    #[test]
    fn pkvx_round_trip_and_layout() {
        let f = field();
        let mut buf = Vec::new();
        write_pkvx_to(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"PKVX");
        assert_eq!(buf.len(), 4 + 4 + 12 + 24 + 8 + 4 + 24 * 4);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        let back = read_pkvx_from(Cursor::new(&buf)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn pkvx_corruption() {
        let mut buf = Vec::new();
        write_pkvx_to(&mut buf, &field()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_pkvx_from(Cursor::new(&bad)), Err(Error::Corrupt { .. })));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read_pkvx_from(Cursor::new(&bad)), Err(Error::Corrupt { .. })));
        assert!(matches!(
            read_pkvx_from(Cursor::new(&buf[..buf.len() - 1])),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn pgm_slices_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let f = field();
        let (norm, paths) = write_pgm_slices(&f, 1, dir.path(), "f").unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(norm.min, 3.0);
        assert_eq!(norm.max, 8.5);
        let bytes = std::fs::read(&paths[0]).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 6);
        assert_eq!(bytes[11], 0);
        let last = std::fs::read(&paths[1]).unwrap();
        assert_eq!(*last.last().unwrap(), 255);

        let csv = dir.path().join("f.csv");
        write_field_csv(&csv, &f).unwrap();
        assert_eq!(read_field_csv(&csv, f.grid()).unwrap(), f);
    }
}

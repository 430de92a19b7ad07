//! 2D landmark likelihood maps.
//!
//! PKHM layout, little-endian: `b"PKHM"`, width `u32`, height `u32`,
//! channel count `u32`, then `channels × width × height` `f32` values,
//! channel-major with x fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::Pixel;
use crate::error::{invalid, Error, Result};

const MAGIC: &[u8; 4] = b"PKHM";

/// `N` landmark channels of `W × H` values in `[0, 1]`; pixel `(x, y)` is
/// the sample at integer coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap2D {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Heatmap2D {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(invalid("heatmap dimensions must be positive"));
        }
        if values.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {channels} × {width} × {height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("heatmap value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// Bilinear sample at `(u, v)`; zero outside `[0, W-1] × [0, H-1]`.
    pub fn bilinear(&self, c: usize, u: f64, v: f64) -> f64 {
        let (w, h) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(u >= 0.0 && u <= w && v >= 0.0 && v <= h) {
            return 0.0;
        }
        let (x0, y0) = (u.floor() as usize, v.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (u - x0 as f64, v - y0 as f64);
        let top = self.get(c, x0, y0) * (1.0 - fx) + self.get(c, x1, y0) * fx;
        let bottom = self.get(c, x0, y1) * (1.0 - fx) + self.get(c, x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Raises one pixel, keeping the value in range.
    pub fn set(&mut self, c: usize, x: usize, y: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid(format!("heatmap value {value} outside [0, 1]")));
        }
        let i = (c * self.height + y) * self.width + x;
        self.values[i] = value;
        Ok(())
    }
}

/// One isotropic Gaussian per landmark, peak 1 at the landmark position.
pub fn gaussian_heatmap(landmarks: &[Pixel], sigma_px: f64, width: usize, height: usize) -> Result<Heatmap2D> {
    if !(sigma_px.is_finite() && sigma_px > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma_px}")));
    }
    if landmarks.is_empty() {
        return Err(invalid("at least one landmark is required"));
    }
    let denom = 2.0 * sigma_px * sigma_px;
    let mut values = Vec::with_capacity(landmarks.len() * width * height);
    for l in landmarks {
        for y in 0..height {
            for x in 0..width {
                let d2 = (x as f64 - l.x).powi(2) + (y as f64 - l.y).powi(2);
                values.push((-d2 / denom).exp());
            }
        }
    }
    Heatmap2D::new(width, height, landmarks.len(), values)
}

fn corrupt(reason: impl Into<String>) -> Error {
    Error::Corrupt {
        format: "PKHM",
        reason: reason.into(),
    }
}

pub fn write_pkhm(path: impl AsRef<Path>, hm: &Heatmap2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pkhm_to(&mut w, hm)?;
    w.flush()?;
    Ok(())
}

pub fn write_pkhm_to<W: Write>(mut w: W, hm: &Heatmap2D) -> Result<()> {
    w.write_all(MAGIC)?;
    for d in [hm.width, hm.height, hm.channels] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in &hm.values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_pkhm(path: impl AsRef<Path>) -> Result<Heatmap2D> {
    read_pkhm_from(BufReader::new(File::open(path)?))
}

pub fn read_pkhm_from<R: Read>(mut r: R) -> Result<Heatmap2D> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|_| corrupt("truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let dim = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (width, height, channels) = (dim(0), dim(1), dim(2));
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|n| *n <= 1 << 30)
        .ok_or_else(|| corrupt("implausible dimensions"))?;
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(|_| corrupt("truncated payload"))?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Heatmap2D::new(width, height, channels, values).map_err(|e| corrupt(e.to_string()))
}

/// One 8-bit PGM per channel, `{prefix}_c{c:02}.pgm`, scaled by 255.
pub fn write_heatmap_pgms(hm: &Heatmap2D, dir: impl AsRef<Path>, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for c in 0..hm.channels {
        let path = dir.as_ref().join(format!("{prefix}_c{c:02}.pgm"));
        let mut w = BufWriter::new(File::create(&path)?);
        write!(w, "P5\n{} {}\n255\n", hm.width, hm.height)?;
        let bytes: Vec<u8> = hm.channel(c).iter().map(|v| (v * 255.0).round() as u8).collect();
        w.write_all(&bytes)?;
        w.flush()?;
        out.push(path);
    }
    Ok(out)
}

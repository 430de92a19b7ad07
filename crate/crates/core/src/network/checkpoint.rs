//! `PKNN` checkpoints: little-endian header, layer manifest, then every
//! layer's weights and biases as f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::conv::{Activation, Conv3Layer};
use super::{PoseNet, PoseNetConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PKNN";
const VERSION: u32 = 1;
const MAX_ELEMENTS: usize = 1 << 28;

fn corrupt(reason: impl Into<String>) -> Error {
    Error::Corrupt {
        format: "PKNN",
        reason: reason.into(),
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &PoseNet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, net)?;
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut w: W, net: &PoseNet) -> Result<()> {
    let cfg = net.config();
    let u32s = |w: &mut W, v: usize| w.write_all(&(v as u32).to_le_bytes());
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    u32s(&mut w, cfg.landmarks)?;
    u32s(&mut w, cfg.visual_channels)?;
    u32s(&mut w, cfg.stages)?;
    u32s(&mut w, cfg.kernel_size)?;
    u32s(&mut w, cfg.stem_widths.len())?;
    for &s in &cfg.stem_widths {
        u32s(&mut w, s)?;
    }
    u32s(&mut w, cfg.stage_widths.len())?;
    for &s in &cfg.stage_widths {
        u32s(&mut w, s)?;
    }
    w.write_all(&cfg.learning_rate.to_le_bytes())?;
    w.write_all(&cfg.seed.to_le_bytes())?;
    let layers = net.layers();
    u32s(&mut w, layers.len())?;
    for l in &layers {
        u32s(&mut w, l.in_channels)?;
        u32s(&mut w, l.out_channels)?;
        for k in l.kernel {
            u32s(&mut w, k)?;
        }
        let act = match l.activation {
            Activation::Relu => 0u32,
            Activation::Identity => 1,
        };
        w.write_all(&act.to_le_bytes())?;
    }
    for l in &layers {
        for v in l.weights.iter().chain(&l.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<PoseNet> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<PoseNet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated header"))?;
    if &magic != MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let landmarks = read_count(&mut r)?;
    let visual_channels = read_count(&mut r)?;
    let stages = read_count(&mut r)?;
    let kernel_size = read_count(&mut r)?;
    let n = read_count(&mut r)?;
    let stem_widths = (0..n).map(|_| read_count(&mut r)).collect::<Result<Vec<_>>>()?;
    let n = read_count(&mut r)?;
    let stage_widths = (0..n).map(|_| read_count(&mut r)).collect::<Result<Vec<_>>>()?;
    let learning_rate = f64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let config = PoseNetConfig {
        landmarks,
        visual_channels,
        stages,
        stem_widths,
        stage_widths,
        kernel_size,
        learning_rate,
        seed,
    };
    config.validate().map_err(|e| corrupt(e.to_string()))?;

    let count = read_count(&mut r)?;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let in_channels = read_count(&mut r)?;
        let out_channels = read_count(&mut r)?;
        let kernel = [read_count(&mut r)?, read_count(&mut r)?, read_count(&mut r)?];
        let activation = match read_u32(&mut r)? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            other => return Err(corrupt(format!("unknown activation tag {other}"))),
        };
        let size = in_channels
            .checked_mul(out_channels)
            .and_then(|v| v.checked_mul(kernel.iter().product()))
            .filter(|v| *v <= MAX_ELEMENTS)
            .ok_or_else(|| corrupt("implausible layer size"))?;
        manifest.push((in_channels, out_channels, kernel, activation, size));
    }
    let mut layers = Vec::with_capacity(count);
    for (in_channels, out_channels, kernel, activation, size) in manifest {
        let mut layer = Conv3Layer::zeros(in_channels, out_channels, kernel, activation).map_err(|e| corrupt(e.to_string()))?;
        debug_assert_eq!(layer.weights.len(), size);
        for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *v = f64::from_le_bytes(read_array(&mut r).map_err(|_| corrupt("truncated weights"))?);
        }
        layers.push(layer);
    }
    PoseNet::from_layers(config, layers).map_err(|e| corrupt(e.to_string()))
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated header"))?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_count<R: Read>(r: &mut R) -> Result<usize> {
    let v = read_u32(r)? as usize;
    if v > 1 << 20 {
        return Err(corrupt(format!("implausible count {v}")));
    }
    Ok(v)
}

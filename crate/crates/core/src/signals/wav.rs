//! Mono RIFF/WAVE I/O. Writes IEEE float32; reads float32 and PCM16.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    read_wav_from(BufReader::new(File::open(path)?))
}

pub fn read_wav_from<R: Read>(reader: R) -> Result<Waveform> {
    let reader = WavReader::new(reader).map_err(map_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels, only mono is supported",
            spec.channels
        )));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_err)?,
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_err)?,
        (format, bits) => {
            return Err(Error::UnsupportedFormat(format!("{format:?} with {bits} bits per sample")))
        }
    };
    Waveform::new(samples, f64::from(spec.sample_rate))
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_wav_to(&mut file, w)?;
    file.flush()?;
    Ok(())
}

pub fn write_wav_to<W: Write + Seek>(writer: W, w: &Waveform) -> Result<()> {
    let rate = w.sample_rate_hz();
    if rate.fract() != 0.0 || rate > f64::from(u32::MAX) {
        return Err(Error::InvalidArgument(format!(
            "WAV needs an integral sample rate, got {rate}"
        )));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut out = WavWriter::new(writer, spec).map_err(map_err)?;
    for &s in w.samples() {
        out.write_sample(s as f32).map_err(map_err)?;
    }
    out.finalize().map_err(map_err)
}

fn map_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        hound::Error::Unsupported => Error::UnsupportedFormat("unsupported format code".into()),
        hound::Error::FormatError(msg) if msg.contains("format") && msg.contains("unsupported") => {
            Error::UnsupportedFormat(msg.into())
        }
        other => Error::MalformedWav(other.to_string()),
    }
}

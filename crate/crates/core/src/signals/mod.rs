//! Sampled signals: chirp synthesis, band plans, DFT and convolution, WAV I/O.

mod chirp;
pub(crate) mod fft;
mod wav;

pub use chirp::{fdm_partition, gen_chirp, Band, ChirpSpec, FdmPlan};
pub use fft::{convolve, dft, idft, next_pow2, Spectrum};
pub use wav::{read_wav, read_wav_from, write_wav, write_wav_to};

use crate::error::{invalid, Error, Result};

/// Sample rate used throughout unless configured otherwise.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 96_000.0;

/// A real-valued signal sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        check_rate(sample_rate_hz)?;
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Mean power per sample; zero for an empty waveform.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Sample-wise sum; the shorter operand is zero-extended.
    pub fn add(&self, other: &Waveform) -> Result<Waveform> {
        same_rate(self.sample_rate_hz, other.sample_rate_hz)?;
        Ok(Waveform {
            samples: add_padded(&self.samples, &other.samples),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Rounds every sample to the nearest `f32`, the precision of the WAV format.
    pub fn to_f32_precision(&self) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|&s| s as f32 as f64).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

pub(crate) fn check_rate(sample_rate_hz: f64) -> Result<()> {
    if sample_rate_hz.is_finite() && sample_rate_hz > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")))
    }
}

pub(crate) fn same_rate(a: f64, b: f64) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::SampleRateMismatch(a, b))
    }
}

pub(crate) fn add_padded(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = long.to_vec();
    for (o, s) in out.iter_mut().zip(short) {
        *o += s;
    }
    out
}

//! Pose-kernel recovery from recordings.
//!
//! Each recording is deconvolved by the known source with a Wiener-style
//! regularized division restricted to the analysis band,
//!
//! ```text
//! K(f) = R(f) conj(S(f)) / (|S(f)|² + ε)   for f in band, 0 elsewhere,
//! ```
//!
//! and the empty-room response is subtracted tap-wise afterwards. Because
//! the inverse DFT is linear this equals subtracting the spectra first.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::roomsim::{ImpulseResponse, Scene};
use crate::signals::{next_pow2, same_rate, Band, Waveform};

/// Default regularizer relative to the peak source power spectrum.
pub const DEFAULT_EPSILON_REL: f64 = 1e-3;

/// Minimum in-band source energy (sum of |S(f)|² over masked bins).
pub const SILENCE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeconvConfig {
    /// Absolute Wiener regularizer. `None` selects
    /// `DEFAULT_EPSILON_REL * max |S(f)|²`.
    pub epsilon: Option<f64>,
    pub band: Band,
    pub output_taps: usize,
}

impl DeconvConfig {
    pub fn new(band: Band, output_taps: usize) -> Self {
        Self {
            epsilon: None,
            band,
            output_taps,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self {
            epsilon: Some(epsilon),
            ..self
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(invalid(format!("epsilon must be nonnegative, got {eps}")));
            }
        }
        if self.output_taps == 0 {
            return Err(invalid("output_taps must be at least 1"));
        }
        let nyquist = sample_rate_hz / 2.0;
        if !(self.band.lo_hz >= 0.0 && self.band.lo_hz <= self.band.hi_hz && self.band.hi_hz <= nyquist) {
            return Err(Error::Nyquist {
                freq_hz: self.band.hi_hz,
                nyquist_hz: nyquist,
            });
        }
        Ok(())
    }
}

/// Taps needed to cover every path up to twice the room diagonal.
pub fn default_output_taps(scene: &Scene) -> Option<usize> {
    scene.room.map(|room| {
        (room.diagonal_m() * 2.0 / scene.speed_of_sound_mps * scene.sample_rate_hz).ceil() as usize
    })
}

/// DFT length used by [`deconvolve`]; large enough that the circular
/// division never wraps a causal response into the retained taps.
pub fn deconvolution_fft_size(received_len: usize, source_len: usize, output_taps: usize) -> usize {
    next_pow2(received_len.max(source_len) + output_taps)
}

/// Bin mask keeping `band` and its negative-frequency mirror.
pub fn band_mask(size: usize, sample_rate_hz: f64, band: Band) -> Vec<bool> {
    (0..size)
        .map(|k| {
            let k = if k <= size / 2 { k } else { size - k };
            band.contains(k as f64 * sample_rate_hz / size as f64)
        })
        .collect()
}

fn spectrum(samples: &[f64], size: usize) -> Vec<Complex64> {
    crate::signals::fft::real_fft(samples, size)
}

fn inverse(mut bins: Vec<Complex64>) -> Vec<Complex64> {
    crate::signals::fft::ifft_in_place(&mut bins);
    let scale = 1.0 / bins.len() as f64;
    bins.iter_mut().for_each(|b| *b *= scale);
    bins
}

/// Full complex time-domain result before truncation.
pub(crate) fn deconvolve_full(received: &Waveform, source: &Waveform, cfg: &DeconvConfig) -> Result<Vec<Complex64>> {
    same_rate(received.sample_rate_hz(), source.sample_rate_hz())?;
    let rate = source.sample_rate_hz();
    cfg.validate(rate)?;
    let size = deconvolution_fft_size(received.len(), source.len(), cfg.output_taps);
    let mask = band_mask(size, rate, cfg.band);
    let s = spectrum(source.samples(), size);
    let in_band: f64 = s.iter().zip(&mask).filter(|(_, m)| **m).map(|(b, _)| b.norm_sqr()).sum();
    if !(in_band >= SILENCE_THRESHOLD) {
        return Err(Error::SilentSource { energy: in_band });
    }
    let eps = cfg.epsilon.unwrap_or_else(|| {
        DEFAULT_EPSILON_REL * s.iter().map(|b| b.norm_sqr()).fold(0.0, f64::max)
    });
    let mut r = spectrum(received.samples(), size);
    for ((rb, sb), keep) in r.iter_mut().zip(&s).zip(&mask) {
        let denom = sb.norm_sqr() + eps;
        *rb = if *keep && denom > 0.0 {
            *rb * sb.conj() / denom
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    Ok(inverse(r))
}

/// Recovers the impulse response linking `source` to `received`.
pub fn deconvolve(received: &Waveform, source: &Waveform, cfg: &DeconvConfig) -> Result<ImpulseResponse> {
    let full = deconvolve_full(received, source, cfg)?;
    let taps = full[..cfg.output_taps].iter().map(|c| c.re).collect();
    ImpulseResponse::new(taps, source.sample_rate_hz())
}

/// Pose kernel as the full response minus the empty-room response.
pub fn extract_pose_kernel(full: &ImpulseResponse, empty: &ImpulseResponse) -> Result<ImpulseResponse> {
    same_rate(full.sample_rate_hz(), empty.sample_rate_hz())?;
    ImpulseResponse::new(
        crate::signals::add_padded(full.taps(), &empty.scaled(-1.0).into_taps()),
        full.sample_rate_hz(),
    )
}

/// Deconvolves both recordings and subtracts: the whole recovery step.
pub fn recover_pose_kernel(
    full: &Waveform,
    empty: &Waveform,
    source: &Waveform,
    cfg: &DeconvConfig,
) -> Result<ImpulseResponse> {
    extract_pose_kernel(&deconvolve(full, source, cfg)?, &deconvolve(empty, source, cfg)?)
}

/// Magnitude of the analytic signal.
pub fn envelope(k: &ImpulseResponse) -> Result<ImpulseResponse> {
    if k.is_empty() {
        return Err(invalid("envelope of an empty response"));
    }
    let size = next_pow2(2 * k.len());
    let mut bins = spectrum(k.taps(), size);
    let half = size / 2;
    for (i, b) in bins.iter_mut().enumerate() {
        if i == 0 || i == half {
            continue;
        } else if i < half {
            *b *= 2.0;
        } else {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    let analytic = inverse(bins);
    ImpulseResponse::new(analytic[..k.len()].iter().map(|c| c.norm()).collect(), k.sample_rate_hz())
}

/// Projects `ir` onto `band` the same way [`deconvolve`] does: DFT at
/// `fft_size`, mask, inverse, keep the first `output_taps`.
pub fn band_limit(ir: &ImpulseResponse, band: Band, fft_size: usize, output_taps: usize) -> Result<ImpulseResponse> {
    if ir.len() > fft_size || output_taps > fft_size {
        return Err(Error::DftSize {
            size: fft_size,
            len: ir.len().max(output_taps),
        });
    }
    let mask = band_mask(fft_size, ir.sample_rate_hz(), band);
    let mut bins = spectrum(ir.taps(), fft_size);
    for (b, keep) in bins.iter_mut().zip(&mask) {
        if !keep {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    let out = inverse(bins);
    ImpulseResponse::new(out[..output_taps].iter().map(|c| c.re).collect(), ir.sample_rate_hz())
}

/// Normalized zero-lag correlation (cosine similarity), zero-extending the
/// shorter input. Zero when either input has no energy.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (at(a, i), at(b, i));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

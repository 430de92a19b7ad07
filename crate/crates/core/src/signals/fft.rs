use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{same_rate, Waveform};
use crate::error::{invalid, Error, Result};

/// Complex DFT bins of a real waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl Spectrum {
    pub fn new(bins: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        super::check_rate(sample_rate_hz)?;
        if bins.is_empty() {
            return Err(invalid("spectrum needs at least one bin"));
        }
        Ok(Self {
            bins,
            sample_rate_hz,
        })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Absolute frequency of bin `k`; bins above N/2 map to their negative
    /// mirror and report the same magnitude.
    pub fn bin_frequency_hz(&self, k: usize) -> f64 {
        let n = self.bins.len();
        let k = if k <= n / 2 { k } else { n - k };
        k as f64 * self.sample_rate_hz / n as f64
    }

    /// Largest deviation from `X[k] = conj(X[N-k])`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.bins.len();
        (0..n)
            .map(|k| (self.bins[k] - self.bins[(n - k) % n].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|b| b.norm_sqr()).sum()
    }
}

/// Smallest power of two that is `>= n` (1 for `n == 0`).
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse transform.
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
}

pub(crate) fn real_fft(samples: &[f64], size: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (b, &s) in buf.iter_mut().zip(samples) {
        b.re = s;
    }
    fft_in_place(&mut buf);
    buf
}

/// DFT of `w` zero-padded to `size` bins.
pub fn dft(w: &Waveform, size: usize) -> Result<Spectrum> {
    if size < w.len() || size == 0 {
        return Err(Error::DftSize { size, len: w.len() });
    }
    Spectrum::new(real_fft(w.samples(), size), w.sample_rate_hz())
}

/// Inverse DFT keeping the real part; length equals the bin count.
pub fn idft(sp: &Spectrum) -> Waveform {
    let mut buf = sp.bins.clone();
    ifft_in_place(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    let samples = buf.iter().map(|c| c.re * scale).collect();
    Waveform::new(samples, sp.sample_rate_hz).expect("inverse DFT of finite bins is finite")
}

/// Full linear convolution via a zero-padded power-of-two DFT.
pub fn convolve(a: &Waveform, b: &Waveform) -> Result<Waveform> {
    same_rate(a.sample_rate_hz(), b.sample_rate_hz())?;
    if a.is_empty() || b.is_empty() {
        return Waveform::new(Vec::new(), a.sample_rate_hz());
    }
    let len = a.len() + b.len() - 1;
    let size = next_pow2(len);
    let mut fa = real_fft(a.samples(), size);
    let fb = real_fft(b.samples(), size);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft_in_place(&mut fa);
    let scale = 1.0 / size as f64;
    let samples = fa[..len].iter().map(|c| c.re * scale).collect();
    Waveform::new(samples, a.sample_rate_hz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 96_000.0).unwrap()
    }

    #[test]
    fn dc_signal_has_single_bin() {
        let w = Waveform::new(vec![1.0; 8], 8.0).unwrap();
        let sp = dft(&w, 8).unwrap();
        assert!((sp.bins()[0].re - 8.0).abs() < 1e-12);
        for b in &sp.bins()[1..] {
            assert!(b.norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let w = random(1024, 1);
        let sp = dft(&w, 1024).unwrap();
        let back = idft(&sp);
        let err = w
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let rel = (w.energy() - sp.energy() / 1024.0).abs() / w.energy();
        assert!(rel < 1e-6, "{rel}");
        assert!(sp.conjugate_asymmetry() < 1e-9);
    }

    #[test]
    fn padded_round_trip_truncates() {
        let w = random(100, 2);
        let back = idft(&dft(&w, 256).unwrap());
        assert_eq!(back.len(), 256);
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
        for b in &back.samples()[100..] {
            assert!(b.abs() < 1e-9);
        }
    }

    #[test]
    fn dft_size_too_small() {
        assert!(matches!(dft(&random(10, 3), 8), Err(Error::DftSize { .. })));
    }

    #[test]
    fn convolution_identity_and_annihilator() {
        let s = random(50, 4);
        let delta = Waveform::new(vec![1.0], 96_000.0).unwrap();
        let out = convolve(&delta, &s).unwrap();
        assert_eq!(out.len(), 50);
        for (a, b) in out.samples().iter().zip(s.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = Waveform::zeros(7, 96_000.0).unwrap();
        let out = convolve(&zero, &s).unwrap();
        assert_eq!(out.len(), 56);
        assert!(out.samples().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn convolution_rate_mismatch() {
        let a = Waveform::new(vec![1.0], 1.0).unwrap();
        let b = Waveform::new(vec![1.0], 2.0).unwrap();
        assert!(matches!(convolve(&a, &b), Err(Error::SampleRateMismatch(..))));
    }

    #[test]
    fn bin_frequency_mirrors() {
        let sp = Spectrum::new(vec![Complex64::new(0.0, 0.0); 8], 8.0).unwrap();
        assert_eq!(sp.bin_frequency_hz(1), 1.0);
        assert_eq!(sp.bin_frequency_hz(7), 1.0);
        assert_eq!(sp.bin_frequency_hz(4), 4.0);
    }
}

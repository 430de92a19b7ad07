use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_rate, Waveform};
use crate::error::{invalid, Error, Result};

/// Linear frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub f_start_hz: f64,
    pub f_end_hz: f64,
    pub duration_s: f64,
    pub amplitude: f64,
}

impl ChirpSpec {
    /// 19-32 kHz over 100 ms, the ultrasonic sweep used by the capture rig.
    pub fn ultrasonic() -> Self {
        Self {
            f_start_hz: 19_000.0,
            f_end_hz: 32_000.0,
            duration_s: 0.1,
            amplitude: 1.0,
        }
    }

    /// Same duration and amplitude, sweeping `band` instead.
    pub fn over_band(&self, band: Band) -> Self {
        Self {
            f_start_hz: band.lo_hz,
            f_end_hz: band.hi_hz,
            ..*self
        }
    }

    pub fn band(&self) -> Band {
        Band {
            lo_hz: self.f_start_hz,
            hi_hz: self.f_end_hz,
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        check_rate(sample_rate_hz)?;
        let nyquist_hz = sample_rate_hz / 2.0;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid(format!("chirp duration must be positive, got {}", self.duration_s)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid(format!("chirp amplitude must be positive, got {}", self.amplitude)));
        }
        if !(self.f_start_hz > 0.0 && self.f_start_hz <= self.f_end_hz) {
            return Err(invalid(format!(
                "chirp needs 0 < f_start <= f_end, got {} and {}",
                self.f_start_hz, self.f_end_hz
            )));
        }
        if !(self.f_end_hz < nyquist_hz) {
            return Err(Error::Nyquist {
                freq_hz: self.f_end_hz,
                nyquist_hz,
            });
        }
        Ok(())
    }
}

/// Synthesizes `amplitude * sin(2π(f0 t + k t²/2))` with zero initial phase.
pub fn gen_chirp(spec: &ChirpSpec, sample_rate_hz: f64) -> Result<Waveform> {
    spec.validate(sample_rate_hz)?;
    let len = (spec.duration_s * sample_rate_hz).round() as usize;
    let sweep_rate = (spec.f_end_hz - spec.f_start_hz) / spec.duration_s;
    let samples = (0..len)
        .map(|n| {
            let t = n as f64 / sample_rate_hz;
            spec.amplitude * (2.0 * PI * (spec.f_start_hz * t + 0.5 * sweep_rate * t * t)).sin()
        })
        .collect();
    Waveform::new(samples, sample_rate_hz)
}

/// A frequency interval. Bands from one plan are treated as half-open
/// `[lo, hi)` so that adjacent bands with zero guard do not overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if !(lo_hz.is_finite() && hi_hz.is_finite() && 0.0 <= lo_hz && lo_hz <= hi_hz) {
            return Err(invalid(format!("invalid band {lo_hz}..{hi_hz} Hz")));
        }
        Ok(Self { lo_hz, hi_hz })
    }

    pub fn width_hz(&self) -> f64 {
        self.hi_hz - self.lo_hz
    }

    /// Closed-interval membership, used for DFT bin masks.
    pub fn contains(&self, f_hz: f64) -> bool {
        self.lo_hz <= f_hz && f_hz <= self.hi_hz
    }

    pub fn overlaps(&self, other: &Band) -> bool {
        self.lo_hz < other.hi_hz && other.lo_hz < self.hi_hz
    }
}

/// Per-speaker sub-bands of a master band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmPlan {
    pub master: Band,
    pub bands: Vec<Band>,
    pub guard_hz: f64,
}

impl FdmPlan {
    pub fn band(&self, speaker: usize) -> Option<Band> {
        self.bands.get(speaker).copied()
    }
}

/// Splits `[f_lo, f_hi]` into `n_speakers` equal slots and trims `guard/2`
/// from both sides of every slot.
pub fn fdm_partition(f_lo_hz: f64, f_hi_hz: f64, n_speakers: usize, guard_hz: f64) -> Result<FdmPlan> {
    let master = Band::new(f_lo_hz, f_hi_hz)?;
    if n_speakers == 0 {
        return Err(invalid("FDM plan needs at least one speaker"));
    }
    if !(guard_hz.is_finite() && guard_hz >= 0.0) {
        return Err(invalid(format!("guard must be nonnegative, got {guard_hz}")));
    }
    if !(master.width_hz() > n_speakers as f64 * guard_hz) {
        return Err(Error::BandTooNarrow {
            lo_hz: f_lo_hz,
            hi_hz: f_hi_hz,
            speakers: n_speakers,
            guard_hz,
        });
    }
    let slot = master.width_hz() / n_speakers as f64;
    let bands = (0..n_speakers)
        .map(|i| {
            let lo = f_lo_hz + slot * i as f64;
            let hi = if i + 1 == n_speakers { f_hi_hz } else { f_lo_hz + slot * (i + 1) as f64 };
            Band {
                lo_hz: lo + guard_hz / 2.0,
                hi_hz: hi - guard_hz / 2.0,
            }
        })
        .collect();
    Ok(FdmPlan {
        master,
        bands,
        guard_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ultrasonic_chirp_length() {
        let w = gen_chirp(&ChirpSpec::ultrasonic(), 96_000.0).unwrap();
        assert_eq!(w.len(), 9600);
        assert!(w.samples().iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn degenerate_sweep_is_sinusoid() {
        let spec = ChirpSpec {
            f_start_hz: 1000.0,
            f_end_hz: 1000.0,
            duration_s: 0.01,
            amplitude: 0.5,
        };
        let w = gen_chirp(&spec, 48_000.0).unwrap();
        for (n, s) in w.samples().iter().enumerate() {
            let expect = 0.5 * (2.0 * PI * 1000.0 * n as f64 / 48_000.0).sin();
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn chirp_errors() {
        let mut spec = ChirpSpec::ultrasonic();
        assert!(matches!(gen_chirp(&spec, 60_000.0), Err(Error::Nyquist { .. })));
        spec.duration_s = 0.0;
        assert!(gen_chirp(&spec, 96_000.0).is_err());
        spec.duration_s = -1.0;
        assert!(gen_chirp(&spec, 96_000.0).is_err());
    }

    #[test]
    fn four_speaker_plan() {
        let plan = fdm_partition(19_000.0, 32_000.0, 4, 0.0).unwrap();
        assert_eq!(plan.bands.len(), 4);
        for b in &plan.bands {
            assert!((b.width_hz() - 3250.0).abs() < 1e-9);
        }
        assert_eq!(plan.bands[0].lo_hz, 19_000.0);
        assert_eq!(plan.bands[3].hi_hz, 32_000.0);
    }

    #[test]
    fn single_speaker_gets_master_band() {
        let plan = fdm_partition(19_000.0, 32_000.0, 1, 0.0).unwrap();
        assert_eq!(plan.bands, vec![plan.master]);
    }

    #[test]
    fn too_narrow() {
        assert!(matches!(
            fdm_partition(19_000.0, 20_000.0, 4, 250.0),
            Err(Error::BandTooNarrow { .. })
        ));
        assert!(fdm_partition(19_000.0, 20_000.0, 0, 0.0).is_err());
    }
}

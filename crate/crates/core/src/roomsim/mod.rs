//! Ground-truth acoustics for synthetic scenes.
//!
//! Empty rooms are rendered with the image-source method for a shoebox with a
//! single wall reflection coefficient; the body is a cloud of independent
//! point reflectors. Every path becomes one tap whose fractional delay is
//! split linearly across the two neighbouring samples.

mod scene;

pub use scene::{Reflector, ReflectorCloud, Room, Scene, SceneFile};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Vec3;
use crate::signals::{convolve, same_rate, Waveform};

pub const DEFAULT_SPEED_OF_SOUND_MPS: f64 = 343.0;

/// Spherical spreading is clamped below this path length.
pub const MIN_SPREADING_PATH_M: f64 = 0.1;

/// Positions closer than this are treated as co-located.
pub const COLOCATION_TOL_M: f64 = 1e-3;

/// A tapped delay line; tap `n` sits at time `n / sample_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    sample_rate_hz: f64,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        crate::signals::check_rate(sample_rate_hz)?;
        if let Some(i) = taps.iter().position(|t| !t.is_finite()) {
            return Err(invalid(format!("tap {i} is not finite")));
        }
        Ok(Self {
            taps,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn into_taps(self) -> Vec<f64> {
        self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Tap-wise sum, zero-extending the shorter response.
    pub fn add(&self, other: &ImpulseResponse) -> Result<ImpulseResponse> {
        same_rate(self.sample_rate_hz, other.sample_rate_hz)?;
        Ok(Self {
            taps: crate::signals::add_padded(&self.taps, &other.taps),
            sample_rate_hz: self.sample_rate_hz,
        })
    }

    pub fn scaled(&self, gain: f64) -> ImpulseResponse {
        Self {
            taps: self.taps.iter().map(|t| t * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Zero-pads or truncates to exactly `len` taps.
    pub fn resized(&self, len: usize) -> ImpulseResponse {
        let mut taps = self.taps.clone();
        taps.resize(len, 0.0);
        Self {
            taps,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Index of the largest absolute tap (first on ties).
    pub fn peak_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, t) in self.taps.iter().enumerate() {
            if best.is_none_or(|(_, b)| t.abs() > b) {
                best = Some((i, t.abs()));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn as_waveform(&self) -> Waveform {
        Waveform::new(self.taps.clone(), self.sample_rate_hz).expect("taps are finite")
    }

    pub fn from_waveform(w: Waveform) -> ImpulseResponse {
        let rate = w.sample_rate_hz();
        Self {
            taps: w.into_samples(),
            sample_rate_hz: rate,
        }
    }
}

/// A (speaker, microphone) index pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub speaker: usize,
    pub microphone: usize,
}

impl Pair {
    pub fn new(speaker: usize, microphone: usize) -> Self {
        Self { speaker, microphone }
    }
}

/// One propagation path contributing a single (fractionally placed) tap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTap {
    pub path_length_m: f64,
    pub delay_s: f64,
    pub gain: f64,
    pub reflections: u32,
}

impl PathTap {
    pub fn delay_samples(&self, sample_rate_hz: f64) -> f64 {
        self.delay_s * sample_rate_hz
    }
}

/// Image sources of a shoebox room, direct path first.
///
/// Along each axis the image of coordinate `s` is `(1 - 2q) s + 2 n L` with
/// `q ∈ {0, 1}`, `n ∈ ℤ`, which involves `|2n - q|` wall reflections. Images
/// whose total reflection count exceeds the scene's image order are skipped.
pub fn image_sources(scene: &Scene, pair: Pair) -> Result<Vec<PathTap>> {
    let (spk, mic) = scene.pair_positions(pair)?;
    let direct = (spk - mic).norm();
    if direct < COLOCATION_TOL_M {
        return Err(Error::Colocated {
            what: "speaker and microphone",
            distance_m: direct,
        });
    }
    let v = scene.speed_of_sound_mps;
    let tap = |len: f64, reflections: u32, beta: f64| PathTap {
        path_length_m: len,
        delay_s: len / v,
        gain: beta.powi(reflections as i32) / len.max(MIN_SPREADING_PATH_M),
        reflections,
    };
    let Some(room) = &scene.room else {
        return Ok(vec![tap(direct, 0, 1.0)]);
    };
    let order = scene.image_order as i64;
    // Per axis: every (coordinate, reflection count) with count <= order.
    let axis_images = |s: f64, l: f64| -> Vec<(f64, u32)> {
        let mut out = Vec::new();
        for n in -order..=order {
            for q in 0..=1i64 {
                let count = (2 * n - q).unsigned_abs();
                if count as i64 <= order {
                    out.push(((1 - 2 * q) as f64 * s + 2.0 * n as f64 * l, count as u32));
                }
            }
        }
        out.sort_by_key(|&(_, c)| c);
        out
    };
    let xs = axis_images(spk.x, room.extents.x);
    let ys = axis_images(spk.y, room.extents.y);
    let zs = axis_images(spk.z, room.extents.z);
    let mut taps = Vec::new();
    for &(x, cx) in &xs {
        for &(y, cy) in &ys {
            for &(z, cz) in &zs {
                let count = cx + cy + cz;
                if count as i64 > order {
                    continue;
                }
                let len = (Vec3::new(x, y, z) - mic).norm();
                taps.push(tap(len, count, room.beta));
            }
        }
    }
    taps.sort_by(|a, b| a.reflections.cmp(&b.reflections).then(a.delay_s.total_cmp(&b.delay_s)));
    Ok(taps)
}

/// Direct-reflection paths through each body point, in cloud order.
pub fn reflector_paths(scene: &Scene, body: &ReflectorCloud, pair: Pair) -> Result<Vec<PathTap>> {
    let (spk, mic) = scene.pair_positions(pair)?;
    body.points
        .iter()
        .map(|r| {
            let d_spk = (spk - r.position).norm();
            let d_mic = (mic - r.position).norm();
            if d_spk < COLOCATION_TOL_M || d_mic < COLOCATION_TOL_M {
                return Err(Error::Colocated {
                    what: "reflector and transducer",
                    distance_m: d_spk.min(d_mic),
                });
            }
            let len = d_spk + d_mic;
            Ok(PathTap {
                path_length_m: len,
                delay_s: len / scene.speed_of_sound_mps,
                gain: r.gain / (d_spk * d_mic),
                reflections: 1,
            })
        })
        .collect()
}

/// Renders taps into a delay line just long enough for the latest one.
pub fn render_taps(paths: &[PathTap], sample_rate_hz: f64) -> Result<ImpulseResponse> {
    let positions: Vec<f64> = paths.iter().map(|p| p.delay_samples(sample_rate_hz)).collect();
    let len = positions.iter().fold(0.0f64, |m, &p| m.max(p)).floor() as usize + 2;
    let mut taps = vec![0.0; len];
    for (p, &pos) in paths.iter().zip(&positions) {
        let n = pos.floor() as usize;
        let frac = pos - n as f64;
        taps[n] += p.gain * (1.0 - frac);
        taps[n + 1] += p.gain * frac;
    }
    ImpulseResponse::new(taps, sample_rate_hz)
}

/// Empty-room impulse response between a speaker and a microphone.
pub fn simulate_empty_room(scene: &Scene, pair: Pair) -> Result<ImpulseResponse> {
    render_taps(&image_sources(scene, pair)?, scene.sample_rate_hz)
}

/// Pose kernel of a point-reflector body: one tap per reflector.
pub fn simulate_pose_kernel(scene: &Scene, body: &ReflectorCloud, pair: Pair) -> Result<ImpulseResponse> {
    if body.points.is_empty() {
        scene.pair_positions(pair)?;
        return ImpulseResponse::zeros(1, scene.sample_rate_hz);
    }
    render_taps(&reflector_paths(scene, body, pair)?, scene.sample_rate_hz)
}

/// Noiseless recording of one speaker at one microphone.
pub fn simulate_received(
    scene: &Scene,
    body: Option<&ReflectorCloud>,
    source: &Waveform,
    pair: Pair,
) -> Result<Waveform> {
    same_rate(source.sample_rate_hz(), scene.sample_rate_hz)?;
    let mut response = simulate_empty_room(scene, pair)?;
    if let Some(body) = body {
        response = response.add(&simulate_pose_kernel(scene, body, pair)?)?;
    }
    convolve(source, &response.as_waveform())
}

/// Noiseless recording at microphone `mic` with every speaker playing its own
/// source concurrently; `sources[i]` belongs to speaker `i`.
pub fn simulate_microphone(
    scene: &Scene,
    body: Option<&ReflectorCloud>,
    sources: &[Waveform],
    mic: usize,
) -> Result<Waveform> {
    if sources.len() != scene.speakers.len() {
        return Err(invalid(format!(
            "{} sources for {} speakers",
            sources.len(),
            scene.speakers.len()
        )));
    }
    let mut out = Waveform::zeros(0, scene.sample_rate_hz)?;
    for (spk, source) in sources.iter().enumerate() {
        out = out.add(&simulate_received(scene, body, source, Pair::new(spk, mic))?)?;
    }
    Ok(out)
}

/// Adds white Gaussian noise `snr_db` below the signal's mean power.
pub fn add_noise<R: Rng + ?Sized>(w: &Waveform, snr_db: f64, rng: &mut R) -> Result<Waveform> {
    if !snr_db.is_finite() {
        return Err(invalid(format!("SNR must be finite, got {snr_db}")));
    }
    let sigma = (w.power() / 10f64.powf(snr_db / 10.0)).sqrt();
    if sigma == 0.0 {
        return Ok(w.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let samples = w.samples().iter().map(|s| s + normal.sample(rng)).collect();
    Waveform::new(samples, w.sample_rate_hz())
}

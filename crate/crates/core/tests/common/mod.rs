//! Scene builders and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use posekernel::geometry::{vec3, Vec3};
use posekernel::kernel::{band_limit, correlation, default_output_taps, recover_pose_kernel, DeconvConfig};
use posekernel::roomsim::{simulate_pose_kernel, simulate_received, Pair, Reflector, ReflectorCloud, Scene};
use posekernel::signals::{gen_chirp, next_pow2, ChirpSpec, Waveform, DEFAULT_SAMPLE_RATE_HZ};
use rand::Rng;

pub const FS: f64 = DEFAULT_SAMPLE_RATE_HZ;

pub fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn ultrasonic_chirp() -> Waveform {
    gen_chirp(&ChirpSpec::ultrasonic(), FS).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, lo: [f64; 3], hi: [f64; 3]) -> Vec3 {
    vec3([rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])])
}

/// Random shoebox with one speaker, one microphone and one reflector, all
/// at least 0.3 m from the walls and 0.2 m from each other.
pub fn random_room_scene<R: Rng>(rng: &mut R, beta: f64, image_order: u32) -> (Scene, ReflectorCloud) {
    let ext = [rng.random_range(3.0..6.0), rng.random_range(3.0..6.0), rng.random_range(2.4..3.5)];
    let lo = [0.3; 3];
    let hi = [ext[0] - 0.3, ext[1] - 0.3, ext[2] - 0.3];
    loop {
        let spk = random_point(rng, lo, hi);
        let mic = random_point(rng, lo, hi);
        let refl = random_point(rng, lo, hi);
        if (spk - mic).norm() < 0.2 || (spk - refl).norm() < 0.2 || (mic - refl).norm() < 0.2 {
            continue;
        }
        let scene = Scene::shoebox(ext, beta, vec![spk], vec![mic], image_order).unwrap();
        return (scene, ReflectorCloud::single(refl, rng.random_range(0.2..1.0)));
    }
}

/// Correlation between the kernel extracted from simulated recordings and
/// the band-limited ground-truth kernel.
pub fn extraction_correlation(scene: &Scene, body: &ReflectorCloud, source: &Waveform) -> f64 {
    let pair = Pair::new(0, 0);
    let full = simulate_received(scene, Some(body), source, pair).unwrap();
    let empty = simulate_received(scene, None, source, pair).unwrap();
    let taps = default_output_taps(scene).unwrap();
    let cfg = DeconvConfig::new(posekernel::signals::Band::new(19_000.0, 32_000.0).unwrap(), taps);
    let k = recover_pose_kernel(&full, &empty, source, &cfg).unwrap();
    let truth = simulate_pose_kernel(scene, body, pair).unwrap();
    let size = next_pow2(2 * truth.len().max(taps));
    let truth_bl = band_limit(&truth, cfg.band, size, taps).unwrap();
    correlation(k.taps(), truth_bl.taps())
}

pub fn body(points: &[(Vec3, f64)]) -> ReflectorCloud {
    ReflectorCloud {
        points: points.iter().map(|(p, g)| Reflector { position: *p, gain: *g }).collect(),
    }
}

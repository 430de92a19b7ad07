mod common;

use common::*;
use posekernel::kernel::{deconvolve, envelope, extract_pose_kernel, recover_pose_kernel, DeconvConfig};
use posekernel::roomsim::{simulate_received, ImpulseResponse, Pair};
use posekernel::signals::{convolve, Band, Waveform};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn full_band(taps: usize) -> DeconvConfig {
    DeconvConfig::new(Band::new(19_000.0, 32_000.0).unwrap(), taps)
}

#[test]
fn deconvolution_is_additive_in_the_recording() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let source = ultrasonic_chirp();
    let noise = |rng: &mut ChaCha8Rng| {
        Waveform::new((0..source.len() + 300).map(|_| rng.random_range(-1.0..1.0)).collect(), FS).unwrap()
    };
    let (a, b) = (noise(&mut rng), noise(&mut rng));
    let cfg = full_band(256);
    let lhs = deconvolve(&a.add(&b).unwrap(), &source, &cfg).unwrap();
    let rhs = deconvolve(&a, &source, &cfg).unwrap().add(&deconvolve(&b, &source, &cfg).unwrap()).unwrap();
    for (x, y) in lhs.taps().iter().zip(rhs.taps()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn only_in_band_content_matters() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let source = ultrasonic_chirp();
    let mut k1 = vec![0.0; 700];
    for _ in 0..10 {
        k1[rng.random_range(50..150)] += rng.random_range(-1.0..1.0);
    }
    // A 4 kHz Gaussian-windowed tone: its spectrum is negligible above 19 kHz.
    let centre = 400.0;
    let sigma_t = 48.0;
    let k2: Vec<f64> = k1
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let t = n as f64 - centre;
            v + (-(t * t) / (2.0 * sigma_t * sigma_t)).exp() * (2.0 * std::f64::consts::PI * 4000.0 * n as f64 / FS).cos()
        })
        .collect();
    let cfg = full_band(700);
    let rec = |k: &[f64]| convolve(&source, &Waveform::new(k.to_vec(), FS).unwrap()).unwrap();
    let out1 = deconvolve(&rec(&k1), &source, &cfg).unwrap();
    let out2 = deconvolve(&rec(&k2), &source, &cfg).unwrap();
    let worst = out1.taps().iter().zip(out2.taps()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max difference {worst}");
}

#[test]
fn empty_room_cancels_without_a_body() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let source = ultrasonic_chirp();
    for _ in 0..3 {
        let (scene, _) = random_room_scene(&mut rng, 0.5, 1);
        let pair = Pair::new(0, 0);
        let first = simulate_received(&scene, None, &source, pair).unwrap();
        let second = simulate_received(&scene, None, &source, pair).unwrap();
        let cfg = full_band(posekernel::kernel::default_output_taps(&scene).unwrap());
        let empty_k = deconvolve(&first, &source, &cfg).unwrap();
        let residual = recover_pose_kernel(&second, &first, &source, &cfg).unwrap();
        assert!(residual.energy() < 1e-6 * empty_k.energy());
    }
}

#[test]
fn extracted_kernel_matches_ground_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let source = ultrasonic_chirp();
    for _ in 0..3 {
        let (scene, body) = random_room_scene(&mut rng, 0.3, 1);
        let c = extraction_correlation(&scene, &body, &source);
        assert!(c >= 0.99, "correlation {c}");
    }
}

#[test]
fn extraction_ignores_wall_absorption() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let source = ultrasonic_chirp();
    let (scene, body) = random_room_scene(&mut rng, 0.0, 1);
    let cs: Vec<f64> = [0.0, 0.3, 0.6]
        .iter()
        .map(|b| extraction_correlation(&scene.with_beta(*b), &body, &source))
        .collect();
    let spread = cs.iter().cloned().fold(f64::MIN, f64::max) - cs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.02, "{cs:?}");
}

#[test]
fn cosine_burst_envelope_is_flat() {
    let n = 2048;
    let taps: Vec<f64> = (0..n)
        .map(|i| if (512..1536).contains(&i) { (2.0 * std::f64::consts::PI * 25_000.0 * i as f64 / FS).cos() } else { 0.0 })
        .collect();
    let env = envelope(&ImpulseResponse::new(taps, FS).unwrap()).unwrap();
    let interior = &env.taps()[640..1408];
    let (lo, hi) = interior.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!((hi - lo) / hi < 0.05, "ripple {lo}..{hi}");
}

#[test]
fn identical_recordings_subtract_to_zero() {
    let ir = ImpulseResponse::new(vec![0.3, -0.2, 0.9], FS).unwrap();
    assert!(extract_pose_kernel(&ir, &ir).unwrap().taps().iter().all(|v| *v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_dominates_magnitude(taps in prop::collection::vec(-1.0f64..1.0, 1..300)) {
        let k = ImpulseResponse::new(taps, FS).unwrap();
        let env = envelope(&k).unwrap();
        for (e, v) in env.taps().iter().zip(k.taps()) {
            prop_assert!(*e >= v.abs() - 1e-9);
        }
    }
}

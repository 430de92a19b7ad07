use posekernel::signals::{
    convolve, dft, fdm_partition, gen_chirp, read_wav, write_wav, ChirpSpec, Waveform, DEFAULT_SAMPLE_RATE_HZ,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = DEFAULT_SAMPLE_RATE_HZ;

fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
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

fn wave(v: Vec<f64>) -> Waveform {
    Waveform::new(v, FS).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn convolution_matches_direct_sum_on_64_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let a: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = convolve(&wave(a.clone()), &wave(b.clone())).unwrap();
    assert!(max_abs_diff(fast.samples(), &direct_convolution(&a, &b)) < 1e-9);
}

#[test]
fn chirp_midpoint_frequency() {
    let chirp = gen_chirp(&ChirpSpec::ultrasonic(), FS).unwrap();
    assert_eq!(chirp.len(), 9600);
    let half = 256;
    let window: Vec<f64> = (0..2 * half)
        .map(|n| {
            let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (2 * half - 1) as f64).cos();
            hann * chirp.samples()[4800 - half + n]
        })
        .collect();
    let size = 8192;
    let sp = dft(&wave(window), size).unwrap();
    let peak = (0..size / 2)
        .max_by(|&i, &j| sp.bins()[i].norm().total_cmp(&sp.bins()[j].norm()))
        .unwrap();
    let freq = peak as f64 * FS / size as f64;
    assert!((freq - 25_500.0).abs() < 100.0, "peak at {freq} Hz");
}

#[test]
fn degenerate_sweep_is_a_sinusoid() {
    let spec = ChirpSpec {
        f_start_hz: 1000.0,
        f_end_hz: 1000.0,
        duration_s: 0.01,
        amplitude: 0.5,
    };
    let w = gen_chirp(&spec, FS).unwrap();
    for (n, s) in w.samples().iter().enumerate() {
        let expect = 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / FS).sin();
        assert!((s - expect).abs() < 1e-9);
    }
}

#[test]
fn fdm_four_speaker_widths() {
    let plan = fdm_partition(19_000.0, 32_000.0, 4, 0.0).unwrap();
    assert_eq!(plan.bands.len(), 4);
    for b in &plan.bands {
        assert!((b.width_hz() - 3250.0).abs() < 1e-9);
    }
    let single = fdm_partition(19_000.0, 32_000.0, 1, 0.0).unwrap();
    assert_eq!(single.bands[0], single.master);
}

#[test]
fn wav_round_trip_of_chirp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chirp.wav");
    let chirp = gen_chirp(&ChirpSpec::ultrasonic(), FS).unwrap().to_f32_precision();
    write_wav(&path, &chirp).unwrap();
    let back = read_wav(&path).unwrap();
    assert_eq!(back, chirp);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_convolution_equals_direct_sum(
        a in prop::collection::vec(-1.0f64..1.0, 1..=256),
        b in prop::collection::vec(-1.0f64..1.0, 1..=256),
    ) {
        let fast = convolve(&wave(a.clone()), &wave(b.clone())).unwrap();
        prop_assert!(max_abs_diff(fast.samples(), &direct_convolution(&a, &b)) < 1e-9);
    }

    #[test]
    fn convolution_is_commutative_and_linear(
        a in prop::collection::vec(-1.0f64..1.0, 1..=128),
        b in prop::collection::vec(-1.0f64..1.0, 48),
        c in prop::collection::vec(-1.0f64..1.0, 48),
    ) {
        let (wa, wb, wc) = (wave(a), wave(b.clone()), wave(c.clone()));
        let ab = convolve(&wa, &wb).unwrap();
        let ba = convolve(&wb, &wa).unwrap();
        prop_assert!(max_abs_diff(ab.samples(), ba.samples()) < 1e-9);
        let bc = wave(b.iter().zip(&c).map(|(x, y)| x + y).collect());
        let lhs = convolve(&wa, &bc).unwrap();
        let rhs = ab.add(&convolve(&wa, &wc).unwrap()).unwrap();
        prop_assert!(max_abs_diff(lhs.samples(), rhs.samples()) < 1e-9);
    }

    #[test]
    fn chirp_never_exceeds_amplitude(
        f0 in 100.0f64..20_000.0,
        span in 0.0f64..20_000.0,
        dur in 0.001f64..0.05,
        amp in 0.01f64..10.0,
    ) {
        let spec = ChirpSpec { f_start_hz: f0, f_end_hz: f0 + span, duration_s: dur, amplitude: amp };
        let w = gen_chirp(&spec, FS).unwrap();
        prop_assert!(w.samples().iter().all(|s| s.abs() <= amp));
    }

    #[test]
    fn fdm_bands_are_disjoint_and_inside_master(
        lo in 1.0f64..30_000.0,
        width in 100.0f64..20_000.0,
        n in 1usize..12,
        guard_frac in 0.0f64..0.9,
    ) {
        let hi = lo + width;
        let guard = guard_frac * width / n as f64;
        let plan = fdm_partition(lo, hi, n, guard).unwrap();
        prop_assert_eq!(plan.bands.len(), n);
        for (i, b) in plan.bands.iter().enumerate() {
            prop_assert!(b.lo_hz >= lo && b.hi_hz <= hi);
            for other in &plan.bands[i + 1..] {
                prop_assert!(b.hi_hz <= other.lo_hz, "{:?} overlaps {:?}", b, other);
            }
        }
    }

    #[test]
    fn wav_round_trip_of_f32_values(v in prop::collection::vec(-2.0f32..2.0, 0..512)) {
        let w = Waveform::new(v.iter().map(|x| f64::from(*x)).collect(), 48_000.0).unwrap();
        let mut buf = std::io::Cursor::new(Vec::new());
        posekernel::signals::write_wav_to(&mut buf, &w).unwrap();
        let back = posekernel::signals::read_wav_from(std::io::Cursor::new(buf.into_inner())).unwrap();
        prop_assert_eq!(back, w);
    }
}

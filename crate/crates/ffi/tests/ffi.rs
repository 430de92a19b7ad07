use std::ffi::{CStr, CString};
use std::ptr;

use posekernel_ffi::*;

const FS: f64 = 96_000.0;

fn signal(samples: &[f64]) -> *mut PkSignal {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pk_signal_new(samples.as_ptr(), samples.len(), FS, &mut out) }, PkStatus::Ok);
    out
}

fn samples(s: *const PkSignal) -> Vec<f64> {
    let n = unsafe { pk_signal_len(s) };
    let mut buf = vec![0.0; n];
    let mut written = 0;
    assert_eq!(unsafe { pk_signal_copy(s, buf.as_mut_ptr(), n, &mut written) }, PkStatus::Ok);
    assert_eq!(written, n);
    buf
}

fn last_error() -> String {
    let p = pk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn convolution_through_the_c_abi() {
    let a = signal(&[1.0, 2.0, 3.0]);
    let b = signal(&[0.0, 1.0, 0.5]);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { pk_convolve(a, b, &mut c) }, PkStatus::Ok);
    let got = samples(c);
    for (x, y) in got.iter().zip([0.0, 1.0, 2.5, 4.0, 1.5]) {
        assert!((x - y).abs() < 1e-12);
    }
    assert_eq!(unsafe { pk_signal_sample_rate(c) }, FS);
    unsafe {
        pk_signal_free(a);
        pk_signal_free(b);
        pk_signal_free(c);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pk_signal_new(ptr::null(), 3, FS, &mut out) }, PkStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { pk_chirp(19_000.0, 60_000.0, 0.1, 1.0, FS, &mut out) }, PkStatus::InvalidArgument);
    assert!(last_error().contains("Nyquist"));
    assert!(out.is_null());
    let json = CString::new("{ \"speakers\": [[0,0,0]], \"microphones\": [[1,0,0]], oops }").unwrap();
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { pk_scene_from_json(json.as_ptr(), &mut scene) }, PkStatus::Config);
    assert!(last_error().contains("line 1"));
    let missing = CString::new("/nonexistent/dir/file.pkvx").unwrap();
    let mut field = ptr::null_mut();
    assert_eq!(unsafe { pk_pkvx_read(missing.as_ptr(), &mut field) }, PkStatus::Io);
    // Freeing NULL is a no-op.
    unsafe {
        pk_signal_free(ptr::null_mut());
        pk_field_free(ptr::null_mut());
        pk_scene_free(ptr::null_mut());
    }
}

#[test]
fn simulate_extract_encode_and_locate() {
    let json = CString::new(
        r#"{ "speakers": [[0.0, 0.0, 0.0]], "microphones": [[0.2, 0.0, 0.0]],
             "reflectors": [{ "position": [0.6, 0.8, 0.1], "gain": 0.5 }] }"#,
    )
    .unwrap();
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { pk_scene_from_json(json.as_ptr(), &mut scene) }, PkStatus::Ok);
    let mut chirp = ptr::null_mut();
    assert_eq!(unsafe { pk_chirp(19_000.0, 32_000.0, 0.1, 1.0, FS, &mut chirp) }, PkStatus::Ok);
    let (mut full, mut empty, mut kernel) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(pk_scene_simulate(scene, 0, 0, chirp, true, &mut full), PkStatus::Ok);
        assert_eq!(pk_scene_simulate(scene, 0, 0, chirp, false, &mut empty), PkStatus::Ok);
        assert_eq!(pk_recover_pose_kernel(full, empty, chirp, 19_000.0, 32_000.0, 1024, &mut kernel), PkStatus::Ok);
    }
    let taps = samples(kernel);
    let peak = (0..taps.len()).max_by(|a, b| taps[*a].abs().total_cmp(&taps[*b].abs())).unwrap();
    let (spk, mic, refl) = ([0.0, 0.0, 0.0], [0.2, 0.0, 0.0], [0.6, 0.8, 0.1]);
    let t = unsafe { pk_arrival_time(refl.as_ptr(), spk.as_ptr(), mic.as_ptr(), 343.0) };
    assert!((peak as f64 - t * FS).abs() <= 1.0);

    let grid = PkGrid { origin: [0.3, 0.5, -0.2], cell_m: 0.02, dims: [30, 30, 30] };
    let mut field = ptr::null_mut();
    assert_eq!(unsafe { pk_encode_kernel(kernel, spk.as_ptr(), mic.as_ptr(), 343.0, &grid, true, &mut field) }, PkStatus::Ok);
    assert_eq!(unsafe { pk_field_channels(field) }, 1);
    assert_eq!(unsafe { pk_field_len(field) }, 27_000);
    let mut back = PkGrid { origin: [0.0; 3], cell_m: 0.0, dims: [0; 3] };
    assert_eq!(unsafe { pk_field_grid(field, &mut back) }, PkStatus::Ok);
    assert_eq!(back, grid);
    let (mut idx, mut pos) = ([0usize; 3], [0.0f64; 3]);
    assert_eq!(unsafe { pk_argmax(field, 0, idx.as_mut_ptr(), pos.as_mut_ptr()) }, PkStatus::Ok);
    let t_best = unsafe { pk_arrival_time(pos.as_ptr(), spk.as_ptr(), mic.as_ptr(), 343.0) };
    // The peak lies on the reflector's ellipsoid to within a cell.
    assert!(((t_best - t) * 343.0).abs() < 2.0 * 0.02 * 3f64.sqrt());
    unsafe {
        for s in [chirp, full, empty, kernel] {
            pk_signal_free(s);
        }
        pk_field_free(field);
        pk_scene_free(scene);
    }
}

#[test]
fn fusion_argmax_and_pkvx_round_trip() {
    let grid = PkGrid { origin: [0.0; 3], cell_m: 0.1, dims: [2, 2, 1] };
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(pk_field_new(&grid, 1, [0.1, 0.9, 0.4, 0.3].as_ptr(), 4, &mut a), PkStatus::Ok);
        assert_eq!(pk_field_new(&grid, 1, [0.5, 0.2, 0.8, 0.1].as_ptr(), 4, &mut b), PkStatus::Ok);
    }
    let inputs = [a as *const PkField, b as *const PkField];
    let (mut max, mut prod) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(pk_fuse(inputs.as_ptr(), 2, PkFusion::Max, &mut max), PkStatus::Ok);
        assert_eq!(pk_fuse(inputs.as_ptr(), 2, PkFusion::Product, &mut prod), PkStatus::Ok);
    }
    let mut values = [0.0; 4];
    unsafe { pk_field_copy(max, values.as_mut_ptr(), 4, ptr::null_mut()) };
    assert_eq!(values, [0.5, 0.9, 0.8, 0.3]);
    let mut idx = [9usize; 3];
    unsafe { pk_argmax(prod, 0, idx.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(idx, [0, 1, 0]);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("max.pkvx").to_str().unwrap()).unwrap();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(pk_pkvx_write(path.as_ptr(), max), PkStatus::Ok);
        assert_eq!(pk_pkvx_read(path.as_ptr(), &mut back), PkStatus::Ok);
        pk_field_copy(back, values.as_mut_ptr(), 4, ptr::null_mut());
    }
    // PKVX stores single-precision values.
    assert_eq!(values.map(|v| v as f32), [0.5f32, 0.9, 0.8, 0.3]);

    let mut neg = ptr::null_mut();
    unsafe { pk_field_new(&grid, 1, [-1.0, 0.0, 0.0, 0.0].as_ptr(), 4, &mut neg) };
    let bad = [a as *const PkField, neg as *const PkField];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pk_fuse(bad.as_ptr(), 2, PkFusion::Product, &mut out) }, PkStatus::InvalidArgument);
    unsafe {
        for f in [a, b, max, prod, back, neg] {
            pk_field_free(f);
        }
    }
}

#[test]
fn envelope_and_wav_round_trip() {
    let k = signal(&[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0]);
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { pk_envelope(k, &mut env) }, PkStatus::Ok);
    for (e, v) in samples(env).iter().zip(samples(k)) {
        assert!(*e >= v.abs() - 1e-9);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("k.wav").to_str().unwrap()).unwrap();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(pk_wav_write(path.as_ptr(), k), PkStatus::Ok);
        assert_eq!(pk_wav_read(path.as_ptr(), &mut back), PkStatus::Ok);
    }
    assert_eq!(samples(back), samples(k));
    unsafe {
        pk_signal_free(k);
        pk_signal_free(env);
        pk_signal_free(back);
    }
}

#[test]
fn deconvolution_recovers_a_delay() {
    let mut chirp = ptr::null_mut();
    assert_eq!(unsafe { pk_chirp(19_000.0, 32_000.0, 0.01, 1.0, FS, &mut chirp) }, PkStatus::Ok);
    let mut impulse = vec![0.0; 64];
    impulse[40] = 1.0;
    let k = signal(&impulse);
    let (mut rec, mut out) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(pk_convolve(chirp, k, &mut rec), PkStatus::Ok);
        assert_eq!(pk_deconvolve(rec, chirp, 19_000.0, 32_000.0, 64, &mut out), PkStatus::Ok);
    }
    let taps = samples(out);
    assert_eq!(taps.len(), 64);
    let peak = (0..64).max_by(|a, b| taps[*a].total_cmp(&taps[*b])).unwrap();
    assert_eq!(peak, 40);
    unsafe {
        for s in [chirp, k, rec, out] {
            pk_signal_free(s);
        }
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/posekernel.h")).unwrap();
    for name in ["PkStatus", "PkGrid", "pk_convolve", "pk_recover_pose_kernel", "pk_encode_kernel", "pk_fuse", "pk_last_error", "pk_pkvx_read"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    assert!(!unsafe { CStr::from_ptr(pk_version()) }.to_str().unwrap().is_empty());
}

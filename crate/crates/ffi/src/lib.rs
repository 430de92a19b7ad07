//! C ABI over the `posekernel` library.
//!
//! Objects cross the boundary as opaque handles (`PkSignal`, `PkScene`,
//! `PkField`) that the caller releases with the matching `*_free`. Every
//! fallible call returns a [`PkStatus`]; on failure the message is available
//! from [`pk_last_error`] on the same thread until the next failing call.
//! Panics are caught and reported as [`PkStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use posekernel::geometry::vec3;
use posekernel::kernel::{deconvolve, envelope, recover_pose_kernel, DeconvConfig};
use posekernel::roomsim::{simulate_received, ImpulseResponse, Pair, ReflectorCloud, Scene, SceneFile};
use posekernel::signals::{convolve, gen_chirp, read_wav, write_wav, Band, ChirpSpec, Waveform};
use posekernel::voxel::{
    arrival_time, encode_kernel, encode_kernel_envelope, fuse_max, fuse_product, grid_argmax, read_pkvx, write_pkvx, VoxelField,
    VoxelGrid,
};
use posekernel::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Mismatch = 3,
    Io = 4,
    Corrupt = 5,
    Numerical = 6,
    Config = 7,
    Panic = 8,
}

/// Element-wise fusion rule for [`pk_fuse`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkFusion {
    Max = 0,
    Product = 1,
}

/// Regular voxel lattice: `dims[0] * dims[1] * dims[2]` cells of `cell_m`
/// meters whose first corner sits at `origin`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PkGrid {
    pub origin: [f64; 3],
    pub cell_m: f64,
    pub dims: [usize; 3],
}

/// Sampled real signal with its sample rate (recordings, sources, kernels).
pub struct PkSignal(Waveform);

/// Acoustic scene plus its point reflectors.
pub struct PkScene {
    scene: Scene,
    body: ReflectorCloud,
}

/// Multi-channel voxel field.
pub struct PkField(VoxelField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn status_of(e: &Error) -> PkStatus {
    match e {
        Error::GridMismatch | Error::ShapeMismatch(_) | Error::SampleRateMismatch(..) => PkStatus::Mismatch,
        Error::Io(_) => PkStatus::Io,
        Error::Corrupt { .. } | Error::MalformedWav(_) | Error::UnsupportedFormat(_) => PkStatus::Corrupt,
        Error::Diverged { .. } | Error::SilentSource { .. } => PkStatus::Numerical,
        Error::Config(_) | Error::Json(_) => PkStatus::Config,
        _ => PkStatus::InvalidArgument,
    }
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (PkStatus, String)>) -> PkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PkStatus::Panic
        }
    }
}

fn lib<T>(r: posekernel::Result<T>) -> Result<T, (PkStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PkStatus, String) {
    (PkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PkStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (PkStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<String, (PkStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(String::from)
        .map_err(|_| (PkStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn point(p: *const f64, what: &str) -> Result<posekernel::Vec3, (PkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(vec3([*p, *p.add(1), *p.add(2)]))
}

fn grid_of(g: &PkGrid) -> Result<VoxelGrid, (PkStatus, String)> {
    lib(VoxelGrid::new(vec3(g.origin), g.cell_m, g.dims))
}

fn deconv_config(band_lo_hz: f64, band_hi_hz: f64, output_taps: usize) -> Result<DeconvConfig, (PkStatus, String)> {
    Ok(DeconvConfig::new(lib(Band::new(band_lo_hz, band_hi_hz))?, output_taps))
}

fn ir(k: &PkSignal) -> Result<ImpulseResponse, (PkStatus, String)> {
    lib(ImpulseResponse::new(k.0.samples().to_vec(), k.0.sample_rate_hz()))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` samples into a new signal.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_new(samples: *const f64, len: usize, sample_rate_hz: f64, out: *mut *mut PkSignal) -> PkStatus {
    guard(|| {
        let data = if len == 0 {
            Vec::new()
        } else if samples.is_null() {
            return Err(null("samples"));
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        write_out(out, PkSignal(lib(Waveform::new(data, sample_rate_hz))?))
    })
}

/// # Safety
/// `signal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_len(signal: *const PkSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `signal` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_sample_rate(signal: *const PkSignal) -> f64 {
    signal.as_ref().map_or(0.0, |s| s.0.sample_rate_hz())
}

/// Copies up to `capacity` samples into `buffer`; `written` receives the count.
///
/// # Safety
/// `buffer` must hold `capacity` doubles; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_copy(signal: *const PkSignal, buffer: *mut f64, capacity: usize, written: *mut usize) -> PkStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        let n = s.0.len().min(capacity);
        if n > 0 {
            if buffer.is_null() {
                return Err(null("buffer"));
            }
            ptr::copy_nonoverlapping(s.0.samples().as_ptr(), buffer, n);
        }
        if !written.is_null() {
            *written = n;
        }
        Ok(())
    })
}

/// # Safety
/// `signal` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_free(signal: *mut PkSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Linear chirp from `f_start_hz` to `f_end_hz`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_chirp(
    f_start_hz: f64,
    f_end_hz: f64,
    duration_s: f64,
    amplitude: f64,
    sample_rate_hz: f64,
    out: *mut *mut PkSignal,
) -> PkStatus {
    guard(|| {
        let spec = ChirpSpec { f_start_hz, f_end_hz, duration_s, amplitude };
        write_out(out, PkSignal(lib(gen_chirp(&spec, sample_rate_hz))?))
    })
}

/// Full linear convolution.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_convolve(a: *const PkSignal, b: *const PkSignal, out: *mut *mut PkSignal) -> PkStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        write_out(out, PkSignal(lib(convolve(&a.0, &b.0))?))
    })
}

/// Band-limited deconvolution of `received` by `source`, keeping `output_taps` taps.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_deconvolve(
    received: *const PkSignal,
    source: *const PkSignal,
    band_lo_hz: f64,
    band_hi_hz: f64,
    output_taps: usize,
    out: *mut *mut PkSignal,
) -> PkStatus {
    guard(|| {
        let (r, s) = (deref(received, "received")?, deref(source, "source")?);
        let k = lib(deconvolve(&r.0, &s.0, &deconv_config(band_lo_hz, band_hi_hz, output_taps)?))?;
        write_out(out, PkSignal(k.as_waveform()))
    })
}

/// Pose kernel: deconvolved occupied recording minus deconvolved empty-room recording.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_recover_pose_kernel(
    full: *const PkSignal,
    empty: *const PkSignal,
    source: *const PkSignal,
    band_lo_hz: f64,
    band_hi_hz: f64,
    output_taps: usize,
    out: *mut *mut PkSignal,
) -> PkStatus {
    guard(|| {
        let (f, e, s) = (deref(full, "full")?, deref(empty, "empty")?, deref(source, "source")?);
        let k = lib(recover_pose_kernel(&f.0, &e.0, &s.0, &deconv_config(band_lo_hz, band_hi_hz, output_taps)?))?;
        write_out(out, PkSignal(k.as_waveform()))
    })
}

/// Magnitude of the analytic signal.
///
/// # Safety
/// `kernel` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_envelope(kernel: *const PkSignal, out: *mut *mut PkSignal) -> PkStatus {
    guard(|| {
        let k = ir(deref(kernel, "kernel")?)?;
        write_out(out, PkSignal(lib(envelope(&k))?.as_waveform()))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_wav_read(path: *const c_char, out: *mut *mut PkSignal) -> PkStatus {
    guard(|| write_out(out, PkSignal(lib(read_wav(path_arg(path)?))?)))
}

/// Writes a mono 32-bit float WAV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `signal` must be live.
#[no_mangle]
pub unsafe extern "C" fn pk_wav_write(path: *const c_char, signal: *const PkSignal) -> PkStatus {
    guard(|| lib(write_wav(path_arg(path)?, &deref(signal, "signal")?.0)))
}

/// Parses a scene JSON document (room, speakers, microphones, reflectors).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_scene_from_json(json: *const c_char, out: *mut *mut PkScene) -> PkStatus {
    guard(|| {
        let text = path_arg(json)?;
        let (scene, body) = lib(lib(SceneFile::parse(&text))?.to_scene())?;
        write_out(out, PkScene { scene, body })
    })
}

/// # Safety
/// `scene` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pk_scene_free(scene: *mut PkScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Recording at `microphone` of `source` played by `speaker`, with the
/// scene's reflectors when `with_body` is true and the empty room otherwise.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_scene_simulate(
    scene: *const PkScene,
    speaker: usize,
    microphone: usize,
    source: *const PkSignal,
    with_body: bool,
    out: *mut *mut PkSignal,
) -> PkStatus {
    guard(|| {
        let sc = deref(scene, "scene")?;
        let src = deref(source, "source")?;
        let body = with_body.then_some(&sc.body);
        let r = lib(simulate_received(&sc.scene, body, &src.0, Pair::new(speaker, microphone)))?;
        write_out(out, PkSignal(r))
    })
}

/// Speaker → `x` → microphone time of flight in seconds; NaN on NULL input.
///
/// # Safety
/// Each pointer must be NULL or point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn pk_arrival_time(x: *const f64, speaker: *const f64, microphone: *const f64, speed_mps: f64) -> f64 {
    match (point(x, "x"), point(speaker, "speaker"), point(microphone, "microphone")) {
        (Ok(x), Ok(s), Ok(m)) => arrival_time(&x, &s, &m, speed_mps),
        _ => f64::NAN,
    }
}

/// Spreads `kernel` (or its envelope) over `grid` along the pair's
/// time-of-flight ellipsoids.
///
/// # Safety
/// `kernel` and `grid` must be live; `speaker`/`microphone` point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn pk_encode_kernel(
    kernel: *const PkSignal,
    speaker: *const f64,
    microphone: *const f64,
    speed_mps: f64,
    grid: *const PkGrid,
    use_envelope: bool,
    out: *mut *mut PkField,
) -> PkStatus {
    guard(|| {
        let k = ir(deref(kernel, "kernel")?)?;
        let (s, m) = (point(speaker, "speaker")?, point(microphone, "microphone")?);
        let g = grid_of(deref(grid, "grid")?)?;
        let f = if use_envelope {
            encode_kernel_envelope(&k, &s, &m, speed_mps, &g)
        } else {
            encode_kernel(&k, &s, &m, speed_mps, &g)
        };
        write_out(out, PkField(lib(f)?))
    })
}

/// Field from `channels * cells` values, channel-major then x fastest.
///
/// # Safety
/// `values` must point to `len` doubles; `grid` must be live.
#[no_mangle]
pub unsafe extern "C" fn pk_field_new(
    grid: *const PkGrid,
    channels: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut PkField,
) -> PkStatus {
    guard(|| {
        let g = grid_of(deref(grid, "grid")?)?;
        if values.is_null() && len > 0 {
            return Err(null("values"));
        }
        let data = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
        write_out(out, PkField(lib(VoxelField::new(g, channels, data))?))
    })
}

/// # Safety
/// `field` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_field_channels(field: *const PkField) -> usize {
    field.as_ref().map_or(0, |f| f.0.channels())
}

/// Total number of values (channels × cells).
///
/// # Safety
/// `field` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_field_len(field: *const PkField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// # Safety
/// `field` must be live; `grid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_field_grid(field: *const PkField, grid: *mut PkGrid) -> PkStatus {
    guard(|| {
        let g = deref(field, "field")?.0.grid();
        if grid.is_null() {
            return Err(null("grid"));
        }
        *grid = PkGrid {
            origin: [g.origin().x, g.origin().y, g.origin().z],
            cell_m: g.cell_m(),
            dims: g.dims(),
        };
        Ok(())
    })
}

/// Copies up to `capacity` values into `buffer`; `written` receives the count.
///
/// # Safety
/// `buffer` must hold `capacity` doubles; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pk_field_copy(field: *const PkField, buffer: *mut f64, capacity: usize, written: *mut usize) -> PkStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let n = f.0.values().len().min(capacity);
        if n > 0 {
            if buffer.is_null() {
                return Err(null("buffer"));
            }
            ptr::copy_nonoverlapping(f.0.values().as_ptr(), buffer, n);
        }
        if !written.is_null() {
            *written = n;
        }
        Ok(())
    })
}

/// # Safety
/// `field` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pk_field_free(field: *mut PkField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Element-wise fusion of `count` single-channel fields on one grid.
///
/// # Safety
/// `fields` must point to `count` live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_fuse(fields: *const *const PkField, count: usize, mode: PkFusion, out: *mut *mut PkField) -> PkStatus {
    guard(|| {
        if fields.is_null() {
            return Err(null("fields"));
        }
        let inputs = std::slice::from_raw_parts(fields, count)
            .iter()
            .map(|f| deref(*f, "field").map(|f| f.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let fused = match mode {
            PkFusion::Max => fuse_max(&inputs),
            PkFusion::Product => fuse_product(&inputs),
        };
        write_out(out, PkField(lib(fused)?))
    })
}

/// Grid index and voxel center of the maximum of `channel`; ties resolve
/// to the lowest linear index.
///
/// # Safety
/// `field` must be live; `index` and `position` must be NULL or point to three writable elements.
#[no_mangle]
pub unsafe extern "C" fn pk_argmax(field: *const PkField, channel: usize, index: *mut usize, position: *mut f64) -> PkStatus {
    guard(|| {
        let (idx, pos) = lib(grid_argmax(&deref(field, "field")?.0, channel))?;
        if !index.is_null() {
            ptr::copy_nonoverlapping(idx.as_ptr(), index, 3);
        }
        if !position.is_null() {
            ptr::copy_nonoverlapping([pos.x, pos.y, pos.z].as_ptr(), position, 3);
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pk_pkvx_read(path: *const c_char, out: *mut *mut PkField) -> PkStatus {
    guard(|| write_out(out, PkField(lib(read_pkvx(path_arg(path)?))?)))
}

/// # Safety
/// `path` must be a NUL-terminated string; `field` must be live.
#[no_mangle]
pub unsafe extern "C" fn pk_pkvx_write(path: *const c_char, field: *const PkField) -> PkStatus {
    guard(|| lib(write_pkvx(path_arg(path)?, &deref(field, "field")?.0)))
}

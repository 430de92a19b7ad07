use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ExperimentConfig, Outcome};
use crate::dataset::ToyRig;
use crate::error::{Error, Result};
use crate::geometry::{all_collinear, to_array, Vec3};
use crate::kernel::{deconvolve, default_output_taps, envelope, extract_pose_kernel, DeconvConfig};
use crate::metrics::evaluate;
use crate::network::{load_checkpoint, readout, save_checkpoint, train_sgd, PoseNet, Sample};
use crate::roomsim::{add_noise, reflector_paths, simulate_microphone, ImpulseResponse, Pair, ReflectorCloud, Scene, SceneFile};
use crate::signals::{fdm_partition, gen_chirp, read_wav, write_wav, Band, Waveform};
use crate::vision::{encode_visual, gaussian_heatmap, read_pkhm, write_pkhm, Camera, Pixel};
use crate::voxel::{
    encode_kernel_envelope, fuse_product, grid_argmax, read_pkvx, write_field_csv, write_pgm_slices, write_pkvx,
    VoxelField, VoxelGrid,
};

/// Pose-kernel energy below this fraction of the empty-room response counts as no target.
pub const NO_TARGET_RATIO: f64 = 1e-6;

const HEATMAP_FILE: &str = "heatmaps.pkhm";
const CHECKPOINT_FILE: &str = "model.pknn";

/// Resolved settings for one invocation.
pub(super) struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.out.join(name)
    }

    /// `{command}_meta.json`: seed and produced files, nothing machine-specific.
    fn write_meta(&self, command: &str, files: &[String]) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            command: &'a str,
            version: &'a str,
            seed: u64,
            files: &'a [String],
        }
        write_json(
            &self.path(format!("{command}_meta.json")),
            &Meta {
                command,
                version: env!("CARGO_PKG_VERSION"),
                seed: self.seed,
                files,
            },
        )
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Independent stream `stream` of the run seed.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Scene, body and per-speaker transmit signals.
struct Rig {
    scene: Scene,
    body: ReflectorCloud,
    bands: Vec<Band>,
    sources: Vec<Waveform>,
    grid: VoxelGrid,
    pairs: Vec<Pair>,
}

impl Rig {
    fn load(ctx: &Context) -> Result<Self> {
        let cfg = &ctx.cfg;
        let (scene, body) = SceneFile::load(cfg.scene_path()?)?.to_scene()?;
        cfg.chirp.validate(scene.sample_rate_hz)?;
        let plan = fdm_partition(cfg.chirp.f_start_hz, cfg.chirp.f_end_hz, scene.speakers.len(), cfg.fdm.guard_hz)?;
        let sources = plan
            .bands
            .iter()
            .map(|b| gen_chirp(&cfg.chirp.over_band(*b), scene.sample_rate_hz))
            .collect::<Result<Vec<_>>>()?;
        let pairs = match &cfg.pairs {
            Some(list) => {
                let pairs: Vec<Pair> = list.iter().map(|[s, m]| Pair::new(*s, *m)).collect();
                for p in &pairs {
                    scene.pair_positions(*p)?;
                }
                if pairs.is_empty() {
                    return Err(Error::Config("\"pairs\" must not be empty".into()));
                }
                pairs
            }
            None => scene.all_pairs(),
        };
        Ok(Self {
            scene,
            body,
            bands: plan.bands,
            sources,
            grid: cfg.grid.to_grid()?,
            pairs,
        })
    }

    /// Taps retained by deconvolution: configured, else twice the room
    /// diagonal, else the longest speaker→voxel→microphone path of the grid.
    fn output_taps(&self, ctx: &Context) -> usize {
        if let Some(t) = ctx.cfg.deconv.output_taps {
            return t;
        }
        default_output_taps(&self.scene).unwrap_or_else(|| {
            let [nx, ny, nz] = self.grid.dims();
            let corners: Vec<Vec3> = (0..8)
                .map(|c| {
                    self.grid.center([
                        if c & 1 == 0 { 0 } else { nx - 1 },
                        if c & 2 == 0 { 0 } else { ny - 1 },
                        if c & 4 == 0 { 0 } else { nz - 1 },
                    ])
                })
                .collect();
            let longest = self
                .pairs
                .iter()
                .flat_map(|p| {
                    let (s, m) = (self.scene.speakers[p.speaker], self.scene.microphones[p.microphone]);
                    corners.iter().map(move |c| (c - s).norm() + (c - m).norm())
                })
                .fold(0.0f64, f64::max);
            let slack = 2.0 * self.grid.cell_diagonal_m();
            ((longest + slack) / self.scene.speed_of_sound_mps * self.scene.sample_rate_hz).ceil() as usize + 1
        })
    }

    fn deconv(&self, ctx: &Context, speaker: usize) -> DeconvConfig {
        DeconvConfig {
            epsilon: ctx.cfg.deconv.epsilon,
            band: self.bands[speaker],
            output_taps: self.output_taps(ctx),
        }
    }

    fn camera(&self, ctx: &Context) -> Result<Option<Camera>> {
        ctx.cfg.camera.as_ref().map(|c| c.to_camera()).transpose()
    }
}

fn kernel_stem(p: Pair) -> String {
    format!("kernel_s{}_m{}", p.speaker, p.microphone)
}

fn mic_file(mic: usize, kind: &str) -> String {
    format!("mic{mic}_{kind}.wav")
}

pub(super) fn simulate(ctx: &Context) -> Result<Outcome> {
    let rig = Rig::load(ctx)?;
    let mut out = Outcome::default();
    let mut files = Vec::new();
    for mic in 0..rig.scene.microphones.len() {
        for (kind, body) in [("empty", None), ("full", Some(&rig.body))] {
            let mut rec = simulate_microphone(&rig.scene, body, &rig.sources, mic)?;
            if let Some(snr) = ctx.cfg.snr_db {
                let stream = 2 * mic as u64 + u64::from(kind == "full");
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
                rng.set_stream(stream);
                rec = add_noise(&rec, snr, &mut rng)?;
            }
            let name = mic_file(mic, kind);
            write_wav(ctx.path(&name), &rec)?;
            files.push(name);
        }
    }

    #[derive(Serialize)]
    struct TruthTap {
        reflector: usize,
        path_length_m: f64,
        delay_s: f64,
        delay_samples: f64,
        gain: f64,
    }
    #[derive(Serialize)]
    struct TruthPair {
        speaker: usize,
        microphone: usize,
        band_hz: [f64; 2],
        taps: Vec<TruthTap>,
    }
    #[derive(Serialize)]
    struct Truth {
        seed: u64,
        scene: SceneFile,
        reflectors: Vec<[f64; 3]>,
        pairs: Vec<TruthPair>,
        landmark_pixels: Option<Vec<Option<[f64; 2]>>>,
    }
    let mut pairs = Vec::new();
    for p in &rig.pairs {
        let taps = reflector_paths(&rig.scene, &rig.body, *p)?
            .into_iter()
            .enumerate()
            .map(|(r, t)| TruthTap {
                reflector: r,
                path_length_m: t.path_length_m,
                delay_s: t.delay_s,
                delay_samples: t.delay_samples(rig.scene.sample_rate_hz),
                gain: t.gain,
            })
            .collect();
        let band = rig.bands[p.speaker];
        pairs.push(TruthPair {
            speaker: p.speaker,
            microphone: p.microphone,
            band_hz: [band.lo_hz, band.hi_hz],
            taps,
        });
    }
    let camera = rig.camera(ctx)?;
    let mut landmark_pixels = None;
    if let Some(cam) = &camera {
        if !rig.body.points.is_empty() {
            let projected: Vec<Option<Pixel>> = rig.body.points.iter().map(|r| cam.project(&r.position)).collect();
            let far = Pixel::new(-1e6, -1e6);
            let pixels: Vec<Pixel> = projected.iter().map(|p| p.unwrap_or(far)).collect();
            let hm = gaussian_heatmap(&pixels, ctx.cfg.heatmap_sigma_px, cam.width, cam.height)?;
            write_pkhm(ctx.path(HEATMAP_FILE), &hm)?;
            files.push(HEATMAP_FILE.into());
            landmark_pixels = Some(projected.iter().map(|p| p.map(|p| [p.x, p.y])).collect());
        }
    }
    write_json(
        &ctx.path("truth.json"),
        &Truth {
            seed: ctx.seed,
            scene: SceneFile::from_scene(&rig.scene, &rig.body),
            reflectors: rig.body.points.iter().map(|r| to_array(&r.position)).collect(),
            pairs,
            landmark_pixels,
        },
    )?;
    files.push("truth.json".into());
    ctx.write_meta("simulate", &files)?;
    out.messages.push(format!(
        "simulated {} microphones x {} speakers with {} reflectors into {}",
        rig.scene.microphones.len(),
        rig.scene.speakers.len(),
        rig.body.points.len(),
        ctx.out.display()
    ));
    Ok(out)
}

fn read_recording(ctx: &Context, mic: usize, kind: &str) -> Result<Waveform> {
    let path = ctx.path(mic_file(mic, kind));
    if !path.is_file() {
        return Err(if kind == "empty" {
            Error::Config(format!(
                "missing empty-room recording {}: capture the empty-room calibration response first (record the room with no one present, e.g. `posekernel simulate`)",
                path.display()
            ))
        } else {
            Error::Config(format!("missing recording {} (run `posekernel simulate` first)", path.display()))
        });
    }
    read_wav(&path)
}

pub(super) fn kernel(ctx: &Context) -> Result<Outcome> {
    let rig = Rig::load(ctx)?;
    let mut out = Outcome::default();
    let mut files = Vec::new();
    let mut recordings = Vec::new();
    for mic in 0..rig.scene.microphones.len() {
        let empty = read_recording(ctx, mic, "empty")?;
        let full = read_recording(ctx, mic, "full")?;
        recordings.push((full, empty));
    }

    #[derive(Serialize)]
    struct KernelSummary {
        speaker: usize,
        microphone: usize,
        band_hz: [f64; 2],
        taps: usize,
        peak_sample: Option<usize>,
        energy: f64,
        empty_energy: f64,
        energy_ratio: f64,
        no_target: bool,
    }
    let mut summaries = Vec::new();
    for p in &rig.pairs {
        let cfg = rig.deconv(ctx, p.speaker);
        let (full, empty) = &recordings[p.microphone];
        let source = &rig.sources[p.speaker];
        let empty_k = deconvolve(empty, source, &cfg)?;
        let k = extract_pose_kernel(&deconvolve(full, source, &cfg)?, &empty_k)?;
        let energy = k.energy();
        let empty_energy = empty_k.energy();
        let ratio = if empty_energy > 0.0 { energy / empty_energy } else { energy };
        let no_target = ratio < NO_TARGET_RATIO;
        let peak = if no_target { None } else { envelope(&k)?.peak_index() };
        let stem = kernel_stem(*p);
        write_wav(ctx.path(format!("{stem}.wav")), &k.as_waveform())?;
        let mut csv = String::from("tap,value\n");
        for (i, v) in k.taps().iter().enumerate() {
            let _ = writeln!(csv, "{i},{v:e}");
        }
        std::fs::write(ctx.path(format!("{stem}.csv")), csv)?;
        files.push(format!("{stem}.wav"));
        files.push(format!("{stem}.csv"));
        let band = rig.bands[p.speaker];
        out.messages.push(match peak {
            Some(s) => format!("{stem}: envelope peak at sample {s}, energy ratio {ratio:.3e}"),
            None => format!("{stem}: no target (energy ratio {ratio:.3e})"),
        });
        summaries.push(KernelSummary {
            speaker: p.speaker,
            microphone: p.microphone,
            band_hz: [band.lo_hz, band.hi_hz],
            taps: k.len(),
            peak_sample: peak,
            energy,
            empty_energy,
            energy_ratio: ratio,
            no_target,
        });
    }
    if summaries.iter().all(|s| s.no_target) {
        out.messages.push("no target: every pose kernel is indistinguishable from the empty room".into());
    }
    write_json(&ctx.path("kernels.json"), &summaries)?;
    files.push("kernels.json".into());
    ctx.write_meta("kernel", &files)?;
    Ok(out)
}

fn read_kernel(ctx: &Context, p: Pair) -> Result<ImpulseResponse> {
    let path = ctx.path(format!("{}.wav", kernel_stem(p)));
    if !path.is_file() {
        return Err(Error::Config(format!(
            "missing pose kernel {} (run `posekernel kernel` first)",
            path.display()
        )));
    }
    Ok(ImpulseResponse::from_waveform(read_wav(&path)?))
}

fn encode_pair(ctx: &Context, rig: &Rig, p: Pair) -> Result<VoxelField> {
    let k = read_kernel(ctx, p)?;
    let (spk, mic) = rig.scene.pair_positions(p)?;
    encode_kernel_envelope(&k, &spk, &mic, rig.scene.speed_of_sound_mps, &rig.grid)
}

pub(super) fn encode(ctx: &Context) -> Result<Outcome> {
    let rig = Rig::load(ctx)?;
    let mut out = Outcome::default();
    let mut files = Vec::new();
    for p in &rig.pairs {
        let field = encode_pair(ctx, &rig, *p)?;
        let name = format!("field_s{}_m{}.pkvx", p.speaker, p.microphone);
        write_pkvx(ctx.path(&name), &field)?;
        out.messages.push(format!("{name}: peak {:.3e}", field.max_value()));
        files.push(name);
    }
    ctx.write_meta("encode", &files)?;
    Ok(out)
}

pub(super) fn localize(ctx: &Context) -> Result<Outcome> {
    let rig = Rig::load(ctx)?;
    let mut out = Outcome::default();
    let mut files = Vec::new();
    if rig.pairs.len() == 1 {
        out.warnings.push(
            "only one speaker/microphone pair: the reflector is constrained to an ellipsoid with infinitely many possible locations; the estimate is one point on it"
                .into(),
        );
    }
    let foci: Vec<Vec3> = rig
        .pairs
        .iter()
        .flat_map(|p| [rig.scene.speakers[p.speaker], rig.scene.microphones[p.microphone]])
        .collect();
    if all_collinear(&foci, 1e-6) {
        out.warnings.push("all speaker and microphone positions are collinear: the estimate is ambiguous under rotation about that line".into());
    }
    let fields = rig
        .pairs
        .iter()
        .map(|p| Ok(encode_pair(ctx, &rig, *p)?.peak_normalized()))
        .collect::<Result<Vec<_>>>()?;
    let audio = fuse_product(&fields)?;

    let heatmap_path = ctx.path(HEATMAP_FILE);
    let fused = if heatmap_path.is_file() {
        let cam = rig
            .camera(ctx)?
            .ok_or_else(|| Error::Config(format!("{} is present but the config has no \"camera\"", heatmap_path.display())))?;
        let visual = encode_visual(&read_pkhm(&heatmap_path)?, &cam, &rig.grid)?;
        let channels = (0..visual.channels())
            .map(|c| fuse_product(&[audio.clone(), visual.select_channel(c)?]))
            .collect::<Result<Vec<_>>>()?;
        VoxelField::concat(&channels.iter().collect::<Vec<_>>())?
    } else {
        audio
    };

    #[derive(Serialize)]
    struct Estimate {
        landmark: usize,
        index: [usize; 3],
        position_m: [f64; 3],
        nearest_reflector_error_m: Option<f64>,
    }
    let mut estimates = Vec::new();
    let mut csv = String::from("landmark,i,j,k,x,y,z\n");
    for c in 0..fused.channels() {
        let (idx, pos) = grid_argmax(&fused, c)?;
        let err = rig.body.points.iter().map(|r| (r.position - pos).norm()).reduce(f64::min);
        let _ = writeln!(csv, "{c},{},{},{},{},{},{}", idx[0], idx[1], idx[2], pos.x, pos.y, pos.z);
        out.messages.push(match err {
            Some(e) => format!(
                "landmark {c}: ({:.3}, {:.3}, {:.3}) m, {:.1} cm from the nearest reflector",
                pos.x,
                pos.y,
                pos.z,
                e * 100.0
            ),
            None => format!("landmark {c}: ({:.3}, {:.3}, {:.3}) m", pos.x, pos.y, pos.z),
        });
        estimates.push(Estimate {
            landmark: c,
            index: idx,
            position_m: to_array(&pos),
            nearest_reflector_error_m: err,
        });
    }
    std::fs::write(ctx.path("estimates.csv"), csv)?;
    write_json(&ctx.path("localization.json"), &estimates)?;
    write_pkvx(ctx.path("fused.pkvx"), &fused)?;
    files.extend(["estimates.csv", "localization.json", "fused.pkvx"].map(String::from));
    let slices = ctx.path("slices");
    std::fs::create_dir_all(&slices)?;
    let mut norms = Vec::new();
    for c in 0..fused.channels() {
        let (norm, paths) = write_pgm_slices(&fused, c, &slices, &format!("fused_c{c:02}"))?;
        norms.push(norm);
        files.extend(paths.iter().map(|p| format!("slices/{}", file_name(p))));
    }
    write_json(&slices.join("fused_normalization.json"), &norms)?;
    files.push("slices/fused_normalization.json".into());
    ctx.write_meta("localize", &files)?;
    Ok(out)
}

/// Dataset and network derived from the training settings and run seed.
fn toy_setup(ctx: &Context) -> Result<(ToyRig, crate::network::PoseNetConfig)> {
    let t = &ctx.cfg.training;
    let mut net = t.network.clone();
    net.seed = ctx.seed;
    if net.landmarks != t.toy.landmarks {
        return Err(Error::Config(format!(
            "network predicts {} landmarks but the toy scenes have {}",
            net.landmarks, t.toy.landmarks
        )));
    }
    if net.visual_channels != 0 && net.visual_channels != t.toy.landmarks {
        return Err(Error::Config(format!(
            "network expects {} visual channels; toy scenes provide {} (or use 0 for audio-only)",
            net.visual_channels, t.toy.landmarks
        )));
    }
    Ok((ToyRig::new(t.toy.clone())?, net))
}

fn to_samples(data: &[crate::dataset::LabeledSample], visual: bool) -> Vec<Sample> {
    data.iter()
        .map(|s| if visual { s.sample.clone() } else { s.audio_only() })
        .collect()
}

pub(super) fn train(ctx: &Context) -> Result<Outcome> {
    let (rig, net_cfg) = toy_setup(ctx)?;
    let t = &ctx.cfg.training;
    let data = rig.generate(t.train_samples, derive_seed(ctx.seed, 1))?;
    let samples = to_samples(&data, net_cfg.visual_channels > 0);
    let lr = net_cfg.learning_rate;
    let mut net = PoseNet::new(net_cfg)?;
    let log = train_sgd(&mut net, &samples, t.epochs, lr)?;
    save_checkpoint(ctx.path(CHECKPOINT_FILE), &net)?;
    log.write_csv(ctx.path("training_log.csv"))?;
    ctx.write_meta("train", &[CHECKPOINT_FILE.into(), "training_log.csv".into()])?;
    let mut out = Outcome::default();
    if let (Some(first), Some(last)) = (log.epoch_losses.first(), log.epoch_losses.last()) {
        out.messages.push(format!(
            "trained {} epochs on {} samples: loss {first:.4e} -> {last:.4e}",
            t.epochs, t.train_samples
        ));
    }
    Ok(out)
}

pub(super) fn eval(ctx: &Context) -> Result<Outcome> {
    let (rig, net_cfg) = toy_setup(ctx)?;
    let path = ctx.path(CHECKPOINT_FILE);
    if !path.is_file() {
        return Err(Error::Config(format!("missing checkpoint {} (run `posekernel train` first)", path.display())));
    }
    let net = load_checkpoint(&path)?;
    let stored = net.config();
    let same_shape = stored.landmarks == net_cfg.landmarks
        && stored.visual_channels == net_cfg.visual_channels
        && stored.stages == net_cfg.stages
        && stored.stem_widths == net_cfg.stem_widths
        && stored.stage_widths == net_cfg.stage_widths
        && stored.kernel_size == net_cfg.kernel_size;
    if !same_shape {
        return Err(Error::Config(format!(
            "checkpoint {} does not match the configured network",
            path.display()
        )));
    }
    let data = rig.generate(ctx.cfg.training.test_samples, derive_seed(ctx.seed, 2))?;
    let mut pred = Vec::with_capacity(data.len());
    for s in &data {
        let visual = if stored.visual_channels > 0 { s.sample.visual.as_ref() } else { None };
        let outputs = net.forward(&s.sample.audio, visual)?;
        pred.push(readout(outputs.last().expect("at least one stage")));
    }
    let truth: Vec<Vec<Vec3>> = data.iter().map(|s| s.landmarks.clone()).collect();
    let report = evaluate(&pred, &truth)?;
    std::fs::write(ctx.path("metrics.csv"), report.to_csv())?;
    ctx.write_meta("eval", &["metrics.csv".into()])?;
    let m = &report.mean;
    Ok(Outcome {
        messages: vec![format!(
            "{} test samples: MPJPE {:.2} cm, PCK@10/20/30/40 = {:.2}/{:.2}/{:.2}/{:.2}",
            data.len(),
            m.mpjpe_cm,
            m.pck[0],
            m.pck[1],
            m.pck[2],
            m.pck[3]
        )],
        warnings: Vec::new(),
    })
}

pub(super) fn export(field_path: &Path, out_dir: &Path) -> Result<Outcome> {
    let field = read_pkvx(field_path)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = field_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".into());
    let mut norms = Vec::new();
    let mut count = 0;
    for c in 0..field.channels() {
        let (norm, paths) = write_pgm_slices(&field, c, out_dir, &format!("{stem}_c{c:02}"))?;
        norms.push(norm);
        count += paths.len();
    }
    write_field_csv(out_dir.join(format!("{stem}.csv")), &field)?;
    write_json(&out_dir.join(format!("{stem}_normalization.json")), &norms)?;
    let [nx, ny, _] = field.grid().dims();
    Ok(Outcome {
        messages: vec![format!(
            "wrote {count} PGM slices of {nx}x{ny} and {stem}.csv to {}",
            out_dir.display()
        )],
        warnings: Vec::new(),
    })
}

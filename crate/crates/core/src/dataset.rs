//! Synthetic training scenes: point reflectors at random landmark positions,
//! simulated through the full acoustic pipeline and paired with projected
//! landmark heatmaps.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{vec3, Vec3};
use crate::kernel::{deconvolve, default_output_taps, extract_pose_kernel, DeconvConfig};
use crate::network::{make_target, Sample};
use crate::roomsim::{add_noise, ImpulseResponse, simulate_empty_room, simulate_pose_kernel, Pair, Reflector, ReflectorCloud, Scene};
use crate::signals::{convolve, fdm_partition, gen_chirp, ChirpSpec, Waveform};
use crate::vision::{encode_visual, gaussian_heatmap, Camera, CameraPose, CameraSpec, Pixel};
use crate::voxel::{encode_kernel_envelope, GridSpec, VoxelField, VoxelGrid};

/// Rig and sampling parameters. Speaker `i` and microphone `i` form pair `i`
/// and speaker `i` transmits in FDM band `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub grid: GridSpec,
    pub room: [f64; 3],
    pub beta: f64,
    pub image_order: u32,
    pub speakers: Vec<[f64; 3]>,
    pub microphones: Vec<[f64; 3]>,
    pub camera: CameraSpec,
    pub chirp: ChirpSpec,
    pub guard_hz: f64,
    pub sample_rate_hz: f64,
    pub speed_of_sound_mps: f64,
    pub landmarks: usize,
    pub heatmap_sigma_px: f64,
    /// Standard deviation of Gaussian noise added to projected landmark
    /// pixels, emulating 2D detector error.
    pub pixel_noise_px: f64,
    pub target_sigma_m: f64,
    /// Landmarks keep at least this distance from the grid boundary.
    pub margin_m: f64,
    pub snr_db: Option<f64>,
}

impl Default for ToyConfig {
    /// A 16×16×12 grid of 10 cm cells in a 3.0×3.6×2.4 m room, viewed by a
    /// 64×48 camera from outside the grid. The four pairs sit around the
    /// camera, so every ellipsoid crosses the viewing ray near the true depth.
    fn default() -> Self {
        let eye = [1.5, 0.3, 1.2];
        let offsets = [[-0.2, 0.0, -0.15], [0.2, 0.0, -0.15], [-0.2, 0.0, 0.15], [0.2, 0.0, 0.15]];
        let at = |o: &[f64; 3], dy: f64| [eye[0] + o[0], eye[1] + o[1] + dy, eye[2] + o[2]];
        Self {
            grid: GridSpec {
                origin: [0.7, 1.2, 0.6],
                cell_m: 0.1,
                dims: [16, 16, 12],
            },
            room: [3.0, 3.6, 2.4],
            beta: 0.3,
            image_order: 1,
            speakers: offsets.iter().map(|o| at(o, 0.0)).collect(),
            microphones: offsets.iter().map(|o| at(&[o[0] * 0.5, 0.0, o[2] * 0.5], 0.05)).collect(),
            camera: CameraSpec {
                fx: 30.0,
                fy: 30.0,
                cx: 31.5,
                cy: 23.5,
                width: 64,
                height: 48,
                pose: CameraPose::LookAt {
                    eye,
                    target: [1.5, 2.0, 1.2],
                    up: [0.0, 0.0, 1.0],
                },
            },
            chirp: ChirpSpec::ultrasonic(),
            guard_hz: 250.0,
            sample_rate_hz: crate::signals::DEFAULT_SAMPLE_RATE_HZ,
            speed_of_sound_mps: crate::roomsim::DEFAULT_SPEED_OF_SOUND_MPS,
            landmarks: 1,
            heatmap_sigma_px: 1.5,
            pixel_noise_px: 0.0,
            target_sigma_m: 0.1,
            margin_m: 0.15,
            snr_db: None,
        }
    }
}

/// A sample together with its ground-truth landmark positions.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub sample: Sample,
    pub landmarks: Vec<Vec3>,
}

impl LabeledSample {
    /// Same sample with the visual input dropped.
    pub fn audio_only(&self) -> Sample {
        Sample {
            visual: None,
            ..self.sample.clone()
        }
    }
}

/// Precomputed rig state shared by every generated sample.
#[derive(Debug, Clone)]
pub struct ToyRig {
    config: ToyConfig,
    grid: VoxelGrid,
    scene: Scene,
    camera: Camera,
    sources: Vec<Waveform>,
    deconv: Vec<DeconvConfig>,
    /// Empty-room recording at each microphone.
    empty_recordings: Vec<Waveform>,
    /// Deconvolved empty-room response of each pair.
    empty_kernels: Vec<ImpulseResponse>,
}

impl ToyRig {
    pub fn new(config: ToyConfig) -> Result<Self> {
        if config.speakers.len() != config.microphones.len() || config.speakers.is_empty() {
            return Err(invalid("toy rig needs matching, non-empty speaker and microphone lists"));
        }
        if config.landmarks == 0 {
            return Err(invalid("toy rig needs at least one landmark"));
        }
        if !(config.heatmap_sigma_px > 0.0 && config.target_sigma_m > 0.0) {
            return Err(invalid("heatmap and target widths must be positive"));
        }
        if !(config.margin_m >= 0.0 && config.pixel_noise_px >= 0.0 && config.pixel_noise_px.is_finite()) {
            return Err(invalid("margin and pixel noise must be non-negative"));
        }
        let grid = config.grid.to_grid()?;
        let mut scene = Scene::shoebox(
            config.room,
            config.beta,
            config.speakers.iter().map(|p| vec3(*p)).collect(),
            config.microphones.iter().map(|p| vec3(*p)).collect(),
            config.image_order,
        )?;
        scene.sample_rate_hz = config.sample_rate_hz;
        scene.speed_of_sound_mps = config.speed_of_sound_mps;
        scene.validate()?;
        let camera = config.camera.to_camera()?;
        let plan = fdm_partition(config.chirp.f_start_hz, config.chirp.f_end_hz, scene.speakers.len(), config.guard_hz)?;
        let sources = plan
            .bands
            .iter()
            .map(|b| gen_chirp(&config.chirp.over_band(*b), scene.sample_rate_hz))
            .collect::<Result<Vec<_>>>()?;
        let taps = default_output_taps(&scene).expect("shoebox scene");
        let deconv: Vec<DeconvConfig> = plan.bands.iter().map(|b| DeconvConfig::new(*b, taps)).collect();
        let mut empty_recordings = Vec::with_capacity(scene.microphones.len());
        for mic in 0..scene.microphones.len() {
            let mut rec = Waveform::zeros(0, scene.sample_rate_hz)?;
            for (spk, src) in sources.iter().enumerate() {
                let ir = simulate_empty_room(&scene, Pair::new(spk, mic))?;
                rec = rec.add(&convolve(src, &ir.as_waveform())?)?;
            }
            empty_recordings.push(rec);
        }
        let empty_kernels = (0..scene.speakers.len())
            .map(|i| deconvolve(&empty_recordings[i], &sources[i], &deconv[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            grid,
            scene,
            camera,
            sources,
            deconv,
            empty_recordings,
            empty_kernels,
        })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    /// Uniform positions inside the grid, `margin_m` away from its faces.
    pub fn sample_landmarks<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec3> {
        let lo = self.grid.origin();
        let ext = self.grid.extent_m();
        let m = self.config.margin_m;
        (0..self.config.landmarks)
            .map(|_| {
                Vec3::from_fn(|a, _| {
                    let (a0, a1) = (lo[a] + m, lo[a] + ext[a] - m);
                    if a1 > a0 {
                        rng.random_range(a0..a1)
                    } else {
                        lo[a] + ext[a] / 2.0
                    }
                })
            })
            .collect()
    }

    /// One peak-normalized envelope field per pair, with a unit-gain point
    /// reflector at every landmark.
    pub fn audio_fields<R: Rng + ?Sized>(&self, landmarks: &[Vec3], rng: &mut R) -> Result<Vec<VoxelField>> {
        let body = ReflectorCloud {
            points: landmarks.iter().map(|p| Reflector { position: *p, gain: 1.0 }).collect(),
        };
        let n = self.scene.speakers.len();
        let mut fields = Vec::with_capacity(n);
        for j in 0..n {
            let mut full = self.empty_recordings[j].clone();
            for (i, src) in self.sources.iter().enumerate() {
                let k = simulate_pose_kernel(&self.scene, &body, Pair::new(i, j))?;
                full = full.add(&convolve(src, &k.as_waveform())?)?;
            }
            if let Some(snr) = self.config.snr_db {
                full = add_noise(&full, snr, rng)?;
            }
            let kernel = extract_pose_kernel(&deconvolve(&full, &self.sources[j], &self.deconv[j])?, &self.empty_kernels[j])?;
            let (spk, mic) = self.scene.pair_positions(Pair::new(j, j))?;
            let field = encode_kernel_envelope(&kernel, &spk, &mic, self.scene.speed_of_sound_mps, &self.grid)?;
            fields.push(field.peak_normalized());
        }
        Ok(fields)
    }

    /// Back-projected Gaussian heatmap of the projected landmarks, with
    /// `pixel_noise_px` jitter drawn from `rng`.
    pub fn visual_field<R: Rng + ?Sized>(&self, landmarks: &[Vec3], rng: &mut R) -> Result<VoxelField> {
        let far = Pixel::new(-1e6, -1e6);
        let jitter = Normal::new(0.0, self.config.pixel_noise_px).map_err(|e| invalid(e.to_string()))?;
        let pixels: Vec<Pixel> = landmarks
            .iter()
            .map(|p| match self.camera.project(p) {
                Some(px) if self.config.pixel_noise_px > 0.0 => px + Pixel::new(jitter.sample(rng), jitter.sample(rng)),
                Some(px) => px,
                None => far,
            })
            .collect();
        let hm = gaussian_heatmap(&pixels, self.config.heatmap_sigma_px, self.camera.width, self.camera.height)?;
        encode_visual(&hm, &self.camera, &self.grid)
    }

    pub fn make_sample<R: Rng + ?Sized>(&self, landmarks: Vec<Vec3>, rng: &mut R) -> Result<LabeledSample> {
        let audio = self.audio_fields(&landmarks, rng)?;
        let visual = Some(self.visual_field(&landmarks, rng)?);
        let target = make_target(&landmarks, &self.grid, self.config.target_sigma_m)?;
        Ok(LabeledSample {
            sample: Sample { audio, visual, target },
            landmarks,
        })
    }

    /// `count` samples drawn from a stream seeded by `seed`.
    pub fn generate(&self, count: usize, seed: u64) -> Result<Vec<LabeledSample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let landmarks = self.sample_landmarks(&mut rng);
                self.make_sample(landmarks, &mut rng)
            })
            .collect()
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{Activation, Conv3Layer, LayerGrad};
use super::Tensor4;
use crate::error::{invalid, Error, Result};
use crate::voxel::{VoxelField, VoxelGrid};

/// Architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseNetConfig {
    /// Output heatmaps per stage.
    pub landmarks: usize,
    /// Back-projected visual channels; 0 builds an audio-only net.
    pub visual_channels: usize,
    pub stages: usize,
    /// Output widths of the per-microphone stem layers.
    pub stem_widths: Vec<usize>,
    /// Hidden widths inside each stage; a final layer maps to `landmarks`.
    pub stage_widths: Vec<usize>,
    /// Cubic kernel edge, odd.
    pub kernel_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PoseNetConfig {
    fn default() -> Self {
        Self {
            landmarks: 1,
            visual_channels: 1,
            stages: 6,
            stem_widths: vec![8, 8, 8],
            stage_widths: vec![16, 16],
            kernel_size: 3,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl PoseNetConfig {
    /// Sixteen landmarks, six stages and a unit learning rate.
    pub fn full_scale_preset() -> Self {
        Self {
            landmarks: 16,
            visual_channels: 16,
            learning_rate: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.landmarks == 0 {
            return Err(invalid("network needs at least one landmark"));
        }
        if self.stages == 0 {
            return Err(invalid("network needs at least one stage"));
        }
        if self.stem_widths.is_empty() || self.stem_widths.contains(&0) {
            return Err(invalid("stem widths must be non-empty and positive"));
        }
        if self.stage_widths.contains(&0) {
            return Err(invalid("stage widths must be positive"));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(invalid(format!("kernel size must be odd, got {}", self.kernel_size)));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(invalid(format!("learning rate must be finite and non-negative, got {}", self.learning_rate)));
        }
        Ok(())
    }

    /// Channels of the fused audio features concatenated with the visual input.
    pub fn feature_channels(&self) -> usize {
        self.stem_widths.last().copied().unwrap_or(0) + self.visual_channels
    }

    /// Input channel count of stage `t` (zero-based).
    pub fn stage_input_channels(&self, t: usize) -> usize {
        self.feature_channels() + if t > 0 { self.landmarks } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseNet {
    config: PoseNetConfig,
    stem: Vec<Conv3Layer>,
    stages: Vec<Vec<Conv3Layer>>,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Per microphone: stem input followed by every stem layer output.
    stem: Vec<Vec<Tensor4>>,
    /// Index of the microphone supplying each fused value.
    winner: Vec<u32>,
    /// Per stage: stage input followed by every layer output.
    stages: Vec<Vec<Tensor4>>,
}

impl ForwardTrace {
    pub fn outputs(&self) -> Vec<&Tensor4> {
        self.stages.iter().map(|acts| acts.last().expect("stage has layers")).collect()
    }
}

/// Sum over stages of the mean squared error against `target`.
pub fn loss(predictions: &[VoxelField], target: &VoxelField) -> Result<f64> {
    let mut total = 0.0;
    for p in predictions {
        if p.grid() != target.grid() {
            return Err(Error::GridMismatch);
        }
        if p.channels() != target.channels() {
            return Err(Error::ShapeMismatch(format!(
                "prediction has {} channels, target {}",
                p.channels(),
                target.channels()
            )));
        }
        total += mse(p.values(), target.values());
    }
    Ok(total)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

impl PoseNet {
    /// Xavier-initialized network seeded from `config.seed`.
    pub fn new(config: PoseNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::build(config, |i, o, k, act| Conv3Layer::xavier(i, o, k, act, &mut rng))
    }

    /// All weights and biases zero.
    pub fn zeros(config: PoseNetConfig) -> Result<Self> {
        config.validate()?;
        Self::build(config, Conv3Layer::zeros)
    }

    fn build(
        config: PoseNetConfig,
        mut make: impl FnMut(usize, usize, [usize; 3], Activation) -> Result<Conv3Layer>,
    ) -> Result<Self> {
        let k = [config.kernel_size; 3];
        let mut stem = Vec::with_capacity(config.stem_widths.len());
        let mut width = 1;
        for &w in &config.stem_widths {
            stem.push(make(width, w, k, Activation::Relu)?);
            width = w;
        }
        let mut stages = Vec::with_capacity(config.stages);
        for t in 0..config.stages {
            let mut layers = Vec::with_capacity(config.stage_widths.len() + 1);
            let mut width = config.stage_input_channels(t);
            for &w in &config.stage_widths {
                layers.push(make(width, w, k, Activation::Relu)?);
                width = w;
            }
            layers.push(make(width, config.landmarks, k, Activation::Identity)?);
            stages.push(layers);
        }
        Ok(Self { config, stem, stages })
    }

    /// Assembles a network from explicit layers, checking that the shapes
    /// agree with `config`.
    pub fn from_layers(config: PoseNetConfig, layers: Vec<Conv3Layer>) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        if layers.len() != net.layer_count() {
            return Err(Error::ShapeMismatch(format!(
                "network needs {} layers, got {}",
                net.layer_count(),
                layers.len()
            )));
        }
        for (slot, layer) in net.layers_mut().into_iter().zip(layers) {
            if slot.in_channels != layer.in_channels
                || slot.out_channels != layer.out_channels
                || slot.kernel != layer.kernel
                || slot.activation != layer.activation
                || slot.weights.len() != layer.weights.len()
                || slot.bias.len() != layer.bias.len()
            {
                return Err(Error::ShapeMismatch("layer does not match network configuration".into()));
            }
            *slot = layer;
        }
        Ok(net)
    }

    pub fn config(&self) -> &PoseNetConfig {
        &self.config
    }

    pub fn layer_count(&self) -> usize {
        self.stem.len() + self.stages.iter().map(Vec::len).sum::<usize>()
    }

    /// Stem layers followed by each stage's layers in order.
    pub fn layers(&self) -> Vec<&Conv3Layer> {
        self.stem.iter().chain(self.stages.iter().flatten()).collect()
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Conv3Layer> {
        self.stem.iter_mut().chain(self.stages.iter_mut().flatten()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.parameter_count()).sum()
    }

    fn check_inputs(&self, audio: &[VoxelField], visual: Option<&VoxelField>) -> Result<VoxelGrid> {
        let first = audio.first().ok_or_else(|| invalid("network needs at least one audio field"))?;
        let grid = *first.grid();
        for a in audio {
            if *a.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if a.channels() != 1 {
                return Err(Error::ShapeMismatch(format!("audio fields must have 1 channel, got {}", a.channels())));
            }
        }
        match (visual, self.config.visual_channels) {
            (None, 0) => {}
            (None, v) => return Err(Error::ShapeMismatch(format!("network expects {v} visual channels, got none"))),
            (Some(v), want) => {
                if *v.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                if v.channels() != want {
                    return Err(Error::ShapeMismatch(format!(
                        "network expects {want} visual channels, got {}",
                        v.channels()
                    )));
                }
            }
        }
        Ok(grid)
    }

    /// Per-stage heatmaps on the input grid.
    pub fn forward(&self, audio: &[VoxelField], visual: Option<&VoxelField>) -> Result<Vec<VoxelField>> {
        let grid = self.check_inputs(audio, visual)?;
        let trace = self.trace_checked(audio, visual)?;
        trace.outputs().into_iter().map(|t| t.to_field(&grid)).collect()
    }

    /// Forward pass keeping every activation.
    pub fn forward_trace(&self, audio: &[VoxelField], visual: Option<&VoxelField>) -> Result<ForwardTrace> {
        self.check_inputs(audio, visual)?;
        self.trace_checked(audio, visual)
    }

    fn trace_checked(&self, audio: &[VoxelField], visual: Option<&VoxelField>) -> Result<ForwardTrace> {
        let mut stem = Vec::with_capacity(audio.len());
        for a in audio {
            let mut acts = vec![Tensor4::from_field(a)];
            for layer in &self.stem {
                let next = layer.forward(acts.last().expect("non-empty"))?;
                acts.push(next);
            }
            stem.push(acts);
        }
        let feats: Vec<&Tensor4> = stem.iter().map(|acts| acts.last().expect("non-empty")).collect();
        let mut fused = feats[0].clone();
        let mut winner = vec![0u32; fused.data().len()];
        for (j, f) in feats.iter().enumerate().skip(1) {
            for ((m, w), v) in fused.data_mut().iter_mut().zip(winner.iter_mut()).zip(f.data()) {
                if *v > *m {
                    *m = *v;
                    *w = j as u32;
                }
            }
        }
        let visual_t = visual.map(Tensor4::from_field);
        let base = match &visual_t {
            Some(v) => Tensor4::concat(&[&fused, v])?,
            None => fused,
        };
        let mut stages: Vec<Vec<Tensor4>> = Vec::with_capacity(self.stages.len());
        for (t, layers) in self.stages.iter().enumerate() {
            let input = if t == 0 {
                base.clone()
            } else {
                let prev = stages[t - 1].last().expect("non-empty");
                Tensor4::concat(&[&base, prev])?
            };
            let mut acts = vec![input];
            for layer in layers {
                let next = layer.forward(acts.last().expect("non-empty"))?;
                acts.push(next);
            }
            stages.push(acts);
        }
        Ok(ForwardTrace { stem, winner, stages })
    }

    /// Loss and parameter gradients for one sample, in [`PoseNet::layers`] order.
    pub fn backward(&self, trace: &ForwardTrace, target: &VoxelField) -> Result<(f64, Vec<LayerGrad>)> {
        let target_t = Tensor4::from_field(target);
        let outputs = trace.outputs();
        if outputs.len() != self.stages.len() {
            return Err(Error::ShapeMismatch("trace does not belong to this network".into()));
        }
        for out in &outputs {
            if out.dims() != target_t.dims() || out.channels() != target_t.channels() {
                return Err(Error::ShapeMismatch("target does not match network output".into()));
            }
        }
        let total: f64 = outputs.iter().map(|o| mse(o.data(), target_t.data())).sum();

        let n_stem = self.stem.len();
        let mut grads: Vec<LayerGrad> = self.layers().into_iter().map(LayerGrad::zeros_like).collect();
        let feature_ch = self.config.stem_widths.last().copied().unwrap_or(0);
        let dims = target_t.dims();
        let voxels = target_t.voxels();
        let mut grad_fused = Tensor4::zeros(feature_ch, dims);
        let mut carry: Option<Tensor4> = None;
        let scale = 2.0 / target_t.data().len().max(1) as f64;
        let stage_offsets: Vec<usize> = self
            .stages
            .iter()
            .scan(n_stem, |acc, layers| {
                let start = *acc;
                *acc += layers.len();
                Some(start)
            })
            .collect();

        for t in (0..self.stages.len()).rev() {
            let acts = &trace.stages[t];
            let out = acts.last().expect("non-empty");
            let mut g = Tensor4::zeros(out.channels(), dims);
            for ((gv, o), y) in g.data_mut().iter_mut().zip(out.data()).zip(target_t.data()) {
                *gv = scale * (o - y);
            }
            if let Some(c) = carry.take() {
                for (gv, cv) in g.data_mut().iter_mut().zip(c.data()) {
                    *gv += cv;
                }
            }
            for (l, layer) in self.stages[t].iter().enumerate().rev() {
                let (gin, lg) = layer.backward_cached(&acts[l], &acts[l + 1], &g)?;
                grads[stage_offsets[t] + l].accumulate(&lg);
                g = gin;
            }
            for (a, b) in grad_fused.data_mut().iter_mut().zip(&g.data()[..feature_ch * voxels]) {
                *a += b;
            }
            if t > 0 {
                let start = self.config.feature_channels();
                carry = Some(g.slice_channels(start, self.config.landmarks));
            }
        }

        for (j, acts) in trace.stem.iter().enumerate() {
            let mut g = Tensor4::zeros(feature_ch, dims);
            let mut any = false;
            for ((gv, w), f) in g.data_mut().iter_mut().zip(&trace.winner).zip(grad_fused.data()) {
                if *w as usize == j {
                    *gv = *f;
                    any |= *f != 0.0;
                }
            }
            if !any {
                continue;
            }
            for (l, layer) in self.stem.iter().enumerate().rev() {
                let (gin, lg) = layer.backward_cached(&acts[l], &acts[l + 1], &g)?;
                grads[l].accumulate(&lg);
                g = gin;
            }
        }
        Ok((total, grads))
    }

    /// One plain gradient step.
    pub fn apply_gradients(&mut self, grads: &[LayerGrad], lr: f64) -> Result<()> {
        if grads.len() != self.layer_count() {
            return Err(Error::ShapeMismatch("gradient count does not match layer count".into()));
        }
        for (layer, g) in self.layers_mut().into_iter().zip(grads) {
            for (w, d) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * d;
            }
            for (b, d) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
        Ok(())
    }
}

//! Same-padded, stride-1 3D cross-correlation with analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor4;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

/// One convolution layer. Weights are laid out `out × in × kx × ky × kz`
/// with the z offset fastest; the kernel is centered with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3Layer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Parameter gradients of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &Conv3Layer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }

    pub fn accumulate(&mut self, other: &LayerGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

/// Zero-padded frame in which every kernel offset becomes one contiguous
/// shift. Interior voxels occupy a single span of length `span` starting at
/// `first`; positions in that span that fall on the padding are scratch.
struct PaddedFrame {
    dims: [usize; 3],
    pdims: [usize; 3],
    pad: [usize; 3],
    first: usize,
    span: usize,
}

impl PaddedFrame {
    fn new(dims: [usize; 3], kernel: [usize; 3]) -> Self {
        let pad = [kernel[0] / 2, kernel[1] / 2, kernel[2] / 2];
        let pdims = [dims[0] + 2 * pad[0], dims[1] + 2 * pad[1], dims[2] + 2 * pad[2]];
        let index = |x: usize, y: usize, z: usize| (z * pdims[1] + y) * pdims[0] + x;
        let first = index(pad[0], pad[1], pad[2]);
        let span = if dims.contains(&0) {
            0
        } else {
            index(pad[0] + dims[0] - 1, pad[1] + dims[1] - 1, pad[2] + dims[2] - 1) + 1 - first
        };
        Self { dims, pdims, pad, first, span }
    }

    fn volume(&self) -> usize {
        self.pdims.iter().product()
    }

    /// Signed flat offset of kernel tap `(a, b, c)`.
    fn offset(&self, a: usize, b: usize, c: usize) -> isize {
        let [px, py, _] = self.pdims;
        let d = [a as isize - self.pad[0] as isize, b as isize - self.pad[1] as isize, c as isize - self.pad[2] as isize];
        (d[2] * py as isize + d[1]) * px as isize + d[0]
    }

    /// Copies each channel of `t` into the interior of a zeroed padded buffer.
    fn embed(&self, t: &[f64], channels: usize) -> Vec<f64> {
        let [nx, ny, nz] = self.dims;
        let vol = self.volume();
        let mut out = vec![0.0; channels * vol];
        for ch in 0..channels {
            for z in 0..nz {
                for y in 0..ny {
                    let src = ch * nx * ny * nz + (z * ny + y) * nx;
                    let dst = ch * vol + ((z + self.pad[2]) * self.pdims[1] + y + self.pad[1]) * self.pdims[0] + self.pad[0];
                    out[dst..dst + nx].copy_from_slice(&t[src..src + nx]);
                }
            }
        }
        out
    }

    /// Inverse of [`PaddedFrame::embed`] for buffers holding `span` values
    /// per channel, indexed from `first`.
    fn extract_span(&self, buf: &[f64], channels: usize) -> Vec<f64> {
        let [nx, ny, nz] = self.dims;
        let mut out = vec![0.0; channels * nx * ny * nz];
        for ch in 0..channels {
            for z in 0..nz {
                for y in 0..ny {
                    let dst = ch * nx * ny * nz + (z * ny + y) * nx;
                    let src = ch * self.span + (z * self.pdims[1] + y) * self.pdims[0];
                    out[dst..dst + nx].copy_from_slice(&buf[src..src + nx]);
                }
            }
        }
        out
    }

    /// Like [`PaddedFrame::embed`] but into span-indexed buffers.
    fn embed_span(&self, t: &[f64], channels: usize) -> Vec<f64> {
        let [nx, ny, nz] = self.dims;
        let mut out = vec![0.0; channels * self.span];
        for ch in 0..channels {
            for z in 0..nz {
                for y in 0..ny {
                    let src = ch * nx * ny * nz + (z * ny + y) * nx;
                    let dst = ch * self.span + (z * self.pdims[1] + y) * self.pdims[0];
                    out[dst..dst + nx].copy_from_slice(&t[src..src + nx]);
                }
            }
        }
        out
    }
}

impl Conv3Layer {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: [usize; 3], activation: Activation) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(invalid("layer channel counts must be positive"));
        }
        if kernel.iter().any(|k| k % 2 == 0) {
            return Err(invalid(format!("kernel sizes must be odd, got {kernel:?}")));
        }
        let count = out_channels * in_channels * kernel.iter().product::<usize>();
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weights: vec![0.0; count],
            bias: vec![0.0; out_channels],
            activation,
        })
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn xavier<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_channels, out_channels, kernel, activation)?;
        let k: usize = kernel.iter().product();
        let bound = (6.0 / ((in_channels + out_channels) * k) as f64).sqrt();
        layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        Ok(layer)
    }

    pub fn weight_index(&self, o: usize, i: usize, a: usize, b: usize, c: usize) -> usize {
        let [kx, ky, kz] = self.kernel;
        (((o * self.in_channels + i) * kx + a) * ky + b) * kz + c
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, input: &Tensor4) -> Result<()> {
        if input.channels() != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "layer expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        Ok(())
    }

    /// Visits every (out, in, kernel offset) with its weight index.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize, [usize; 3])) {
        let [kx, ky, kz] = self.kernel;
        for o in 0..self.out_channels {
            for i in 0..self.in_channels {
                for a in 0..kx {
                    for b in 0..ky {
                        for c in 0..kz {
                            f(o, i, self.weight_index(o, i, a, b, c), [a, b, c]);
                        }
                    }
                }
            }
        }
    }

    /// Pre-activation output.
    pub fn preactivation(&self, input: &Tensor4) -> Result<Tensor4> {
        self.check_input(input)?;
        let dims = input.dims();
        let frame = PaddedFrame::new(dims, self.kernel);
        let (vol, span) = (frame.volume(), frame.span);
        let src = frame.embed(input.data(), self.in_channels);
        let mut acc = vec![0.0; self.out_channels * span];
        for o in 0..self.out_channels {
            acc[o * span..(o + 1) * span].iter_mut().for_each(|v| *v = self.bias[o]);
        }
        self.for_each_tap(|o, i, wi, [a, b, c]| {
            let w = self.weights[wi];
            if w == 0.0 {
                return;
            }
            let start = (i * vol + frame.first) as isize + frame.offset(a, b, c);
            let s_row = &src[start as usize..start as usize + span];
            for (dv, sv) in acc[o * span..(o + 1) * span].iter_mut().zip(s_row) {
                *dv += w * sv;
            }
        });
        Tensor4::new(self.out_channels, dims, frame.extract_span(&acc, self.out_channels))
    }

    pub fn forward(&self, input: &Tensor4) -> Result<Tensor4> {
        let mut out = self.preactivation(input)?;
        if self.activation != Activation::Identity {
            out.data_mut().iter_mut().for_each(|v| *v = self.activation.apply(*v));
        }
        Ok(out)
    }

    /// Gradients given the layer input and `dL/d(output)`. Recomputes the
    /// forward pass to obtain the activation mask.
    pub fn backward(&self, input: &Tensor4, grad_out: &Tensor4) -> Result<(Tensor4, LayerGrad)> {
        let output = self.forward(input)?;
        self.backward_cached(input, &output, grad_out)
    }

    /// As [`Conv3Layer::backward`] with the forward output supplied.
    pub fn backward_cached(&self, input: &Tensor4, output: &Tensor4, grad_out: &Tensor4) -> Result<(Tensor4, LayerGrad)> {
        self.check_input(input)?;
        let dims = input.dims();
        if grad_out.dims() != dims || grad_out.channels() != self.out_channels || output.dims() != dims {
            return Err(Error::ShapeMismatch("gradient does not match layer output".into()));
        }
        let n = input.voxels();
        let frame = PaddedFrame::new(dims, self.kernel);
        let (vol, span) = (frame.volume(), frame.span);
        let mut gz = grad_out.data().to_vec();
        if self.activation == Activation::Relu {
            for (g, y) in gz.iter_mut().zip(output.data()) {
                if *y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let mut grads = LayerGrad::zeros_like(self);
        for o in 0..self.out_channels {
            grads.bias[o] = gz[o * n..(o + 1) * n].iter().sum();
        }
        let gz = frame.embed_span(&gz, self.out_channels);
        let src = frame.embed(input.data(), self.in_channels);
        let mut gin = vec![0.0; self.in_channels * vol];
        self.for_each_tap(|o, i, wi, [a, b, c]| {
            let w = self.weights[wi];
            let start = ((i * vol + frame.first) as isize + frame.offset(a, b, c)) as usize;
            let g_row = &gz[o * span..(o + 1) * span];
            let s_row = &src[start..start + span];
            grads.weights[wi] += g_row.iter().zip(s_row).map(|(g, s)| g * s).sum::<f64>();
            if w != 0.0 {
                for (gi, g) in gin[start..start + span].iter_mut().zip(g_row) {
                    *gi += w * g;
                }
            }
        });
        let mut grad_in = vec![0.0; self.in_channels * n];
        let [nx, ny, nz] = dims;
        for ch in 0..self.in_channels {
            for z in 0..nz {
                for y in 0..ny {
                    let dst = ch * n + (z * ny + y) * nx;
                    let s = ch * vol + ((z + frame.pad[2]) * frame.pdims[1] + y + frame.pad[1]) * frame.pdims[0] + frame.pad[0];
                    grad_in[dst..dst + nx].copy_from_slice(&gin[s..s + nx]);
                }
            }
        }
        Ok((Tensor4::new(self.in_channels, dims, grad_in)?, grads))
    }
}

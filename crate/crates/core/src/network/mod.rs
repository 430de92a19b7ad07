//! Multi-stage 3D convolutional heatmap regressor, trained from scratch.
//!
//! Per-microphone audio fields pass through a shared stem of 3D
//! convolutions and are fused by an element-wise max across microphones.
//! The fused features are concatenated with the back-projected visual
//! channels; every stage predicts one heatmap per landmark from those
//! features plus the previous stage's prediction, and every stage is
//! supervised.

mod checkpoint;
mod conv;
mod posenet;
mod target;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use conv::{Activation, Conv3Layer, LayerGrad};
pub use posenet::{loss, ForwardTrace, PoseNet, PoseNetConfig};
pub use target::{make_target, readout};
pub use tensor::Tensor4;
pub use train::{train_sgd, Sample, TrainingLog};

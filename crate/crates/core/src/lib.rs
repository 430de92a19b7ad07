//! Acoustic pose kernels and metric 3D landmark reconstruction.
//!
//! The pipeline runs in five steps:
//!
//! 1. [`signals`] synthesizes linear chirps on a frequency-division band plan
//!    and provides DFT-based convolution and WAV I/O.
//! 2. [`roomsim`] renders empty-room responses (image-source method) and the
//!    body response of a point-reflector cloud, then the received recordings.
//! 3. [`kernel`] recovers the pose kernel by regularized deconvolution and
//!    empty-room subtraction.
//! 4. [`voxel`] spreads each kernel over a metric voxel grid along the
//!    time-of-flight ellipsoids and fuses channels; [`vision`] back-projects 2D
//!    landmark heatmaps into the same grid.
//! 5. [`network`] is a small multi-stage 3D CNN trained from scratch to
//!    regress 3D landmark heatmaps from the fused evidence.
//!
//! [`dataset`] and [`metrics`] glue the stages into synthetic experiments and
//! [`cli`] exposes them as the `posekernel` command.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod metrics;
pub mod network;
pub mod roomsim;
pub mod signals;
pub mod vision;
pub mod voxel;

pub use error::{Error, Result};
pub use geometry::Vec3;

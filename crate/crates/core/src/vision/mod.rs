//! Synthetic 2D landmark heatmaps and their back-projection into a voxel grid.

mod heatmap;

pub use heatmap::{gaussian_heatmap, read_pkhm, read_pkhm_from, write_heatmap_pgms, write_pkhm, write_pkhm_to, Heatmap2D};

use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{vec3, Vec3};
use crate::voxel::{VoxelField, VoxelGrid};

/// Points closer than this to the image plane (camera frame z) do not project.
pub const MIN_DEPTH_M: f64 = 1e-6;

pub type Pixel = Vector2<f64>;

/// Pinhole camera; `rotation` and `translation` map world to camera frame
/// (x right, y down, z forward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` pointing roughly
    /// towards the top of the image.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        focal_px: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = (target - eye).try_normalize(1e-12).ok_or_else(|| invalid("eye equals target"))?;
        let right = forward.cross(&up).try_normalize(1e-12).ok_or_else(|| invalid("up is parallel to the view direction"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        Self::new(
            focal_px,
            focal_px,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            rotation,
            -(rotation * eye),
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(invalid(format!("focal lengths must be positive, got {} and {}", self.fx, self.fy)));
        }
        let err = (self.rotation * self.rotation.transpose() - Matrix3::identity()).abs().max();
        if !(err <= 1e-9) {
            return Err(invalid(format!("rotation is not orthonormal (error {err:e})")));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("image size must be positive"));
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    /// Pixel coordinates of `x`, or `None` when it is not in front of the camera.
    pub fn project(&self, x: &Vec3) -> Option<Pixel> {
        let xc = self.to_camera(x);
        if xc.z <= MIN_DEPTH_M {
            return None;
        }
        Some(Pixel::new(self.fx * xc.x / xc.z + self.cx, self.fy * xc.y / xc.z + self.cy))
    }

    /// World point on the ray through `pixel` at camera-frame depth `depth`.
    pub fn back_project(&self, pixel: &Pixel, depth: f64) -> Vec3 {
        let xc = Vec3::new((pixel.x - self.cx) / self.fx * depth, (pixel.y - self.cy) / self.fy * depth, depth);
        self.rotation.transpose() * (xc - self.translation)
    }

    pub fn spec(&self) -> CameraSpec {
        CameraSpec {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            pose: CameraPose::Extrinsic {
                rotation: [
                    [self.rotation[(0, 0)], self.rotation[(0, 1)], self.rotation[(0, 2)]],
                    [self.rotation[(1, 0)], self.rotation[(1, 1)], self.rotation[(1, 2)]],
                    [self.rotation[(2, 0)], self.rotation[(2, 1)], self.rotation[(2, 2)]],
                ],
                translation: [self.translation.x, self.translation.y, self.translation.z],
            },
        }
    }
}

/// Serializable camera: intrinsics plus either an explicit world→camera
/// transform or a look-at pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: CameraPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraPose {
    Extrinsic {
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    },
    LookAt {
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    },
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<Camera> {
        let (rotation, translation) = match &self.pose {
            CameraPose::Extrinsic { rotation, translation } => (
                Matrix3::from_fn(|r, c| rotation[r][c]),
                vec3(*translation),
            ),
            CameraPose::LookAt { eye, target, up } => {
                let c = Camera::look_at(vec3(*eye), vec3(*target), vec3(*up), 1.0, 1, 1)?;
                (c.rotation, c.translation)
            }
        };
        Camera::new(self.fx, self.fy, self.cx, self.cy, rotation, translation, self.width, self.height)
    }
}

/// Heatmap value of `channel` at the projection of `x`; zero when `x` does
/// not project or lands outside `[0, W-1] × [0, H-1]`.
pub fn visual_feature(hm: &Heatmap2D, cam: &Camera, channel: usize, x: &Vec3) -> f64 {
    cam.project(x).map_or(0.0, |p| hm.bilinear(channel, p.x, p.y))
}

/// Back-projects every landmark channel into the grid.
pub fn encode_visual(hm: &Heatmap2D, cam: &Camera, grid: &VoxelGrid) -> Result<VoxelField> {
    let n = grid.len();
    let mut values = vec![0.0; hm.channels() * n];
    for (lin, x) in grid.centers().enumerate() {
        if let Some(p) = cam.project(&x) {
            for c in 0..hm.channels() {
                values[c * n + lin] = hm.bilinear(c, p.x, p.y);
            }
        }
    }
    VoxelField::new(*grid, hm.channels(), values)
}

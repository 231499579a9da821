//! Pinhole camera shared by the rasterizer and the scan simulator.
//!
//! Camera frame: +z forward, +x right, +y down. Pixel `(u, v)` spans
//! `[u, u+1) × [v, v+1)` and is sampled at its center.

use crate::error::{Error, Result};
use crate::geom::{Point3, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    /// Full horizontal field of view, degrees.
    pub hfov_deg: f64,
    /// Full vertical field of view, degrees.
    pub vfov_deg: f64,
    /// Camera-to-world.
    pub pose: Pose,
    /// Planar depth range kept by the rasterizer.
    pub near: f64,
    pub far: f64,
}

/// Intrinsics derived from a [`CameraModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    pub const DEFAULT_NEAR: f64 = 0.01;
    pub const DEFAULT_FAR: f64 = 1000.0;

    pub fn new(width: u32, height: u32, hfov_deg: f64, vfov_deg: f64, pose: Pose) -> Result<Self> {
        let cam = Self {
            width,
            height,
            hfov_deg,
            vfov_deg,
            pose,
            near: Self::DEFAULT_NEAR,
            far: Self::DEFAULT_FAR,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn with_range(mut self, near: f64, far: f64) -> Result<Self> {
        self.near = near;
        self.far = far;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("camera resolution must be at least 1x1".into()));
        }
        for fov in [self.hfov_deg, self.vfov_deg] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(Error::InvalidConfig(format!("field of view {fov} outside (0, 180)")));
            }
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(Error::InvalidConfig(format!("need 0 < near < far, got {} and {}", self.near, self.far)));
        }
        self.pose.validate()
    }

    pub fn intrinsics(&self) -> Intrinsics {
        let w = self.width as f64;
        let h = self.height as f64;
        Intrinsics {
            fx: 0.5 * w / (0.5 * self.hfov_deg.to_radians()).tan(),
            fy: 0.5 * h / (0.5 * self.vfov_deg.to_radians()).tan(),
            cx: 0.5 * w,
            cy: 0.5 * h,
        }
    }

    /// Camera-frame ray through the pixel center, scaled to unit z.
    pub fn pixel_ray(&self, u: u32, v: u32) -> Vec3 {
        let k = self.intrinsics();
        Vec3::new((u as f64 + 0.5 - k.cx) / k.fx, (v as f64 + 0.5 - k.cy) / k.fy, 1.0)
    }

    /// World point seen at pixel `(u, v)` with planar depth `depth`.
    pub fn unproject(&self, u: u32, v: u32, depth: f64) -> Point3 {
        self.pose.transform_point(&Point3::from(self.pixel_ray(u, v) * depth))
    }

    /// Continuous image coordinates of a camera-frame point with `z > 0`.
    pub fn project_camera_point(&self, p: &Point3) -> [f64; 2] {
        let k = self.intrinsics();
        [k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy]
    }
}

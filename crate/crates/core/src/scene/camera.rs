use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Bounds, SceneError};
use crate::math::{self, Vec3};
use crate::render::Ray;

/// Pinhole camera. The rotation columns are the camera's right, up and
/// backward axes in world coordinates; the camera looks down its `-z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub rotation: [[f64; 3]; 3],
    pub position: Vec3,
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn look_at(
        position: Vec3,
        target: Vec3,
        up: Vec3,
        focal: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, SceneError> {
        let back = math::sub(position, target);
        if math::norm(back) < 1e-12 {
            return Err(SceneError::Camera("position equals target".into()));
        }
        let back = math::normalize(back);
        let right = math::cross(up, back);
        if math::norm(right) < 1e-9 {
            return Err(SceneError::Camera("up vector parallel to view direction".into()));
        }
        let right = math::normalize(right);
        let true_up = math::cross(back, right);
        let mut rotation = [[0.0; 3]; 3];
        for k in 0..3 {
            rotation[k] = [right[k], true_up[k], back[k]];
        }
        let cam = Self {
            rotation,
            position,
            focal,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.focal > 0.0) || self.width == 0 || self.height == 0 {
            return Err(SceneError::Camera("focal and image size must be positive".into()));
        }
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(SceneError::Camera("rotation is not orthonormal".into()));
                }
            }
        }
        Ok(())
    }

    /// Viewing direction in world space.
    pub fn forward(&self) -> Vec3 {
        let r = &self.rotation;
        [-r[0][2], -r[1][2], -r[2][2]]
    }

    /// Unit world direction through the center of pixel `(x, y)`, with
    /// `y = 0` the top row.
    pub fn pixel_dir(&self, x: f64, y: f64) -> Vec3 {
        let cx = (x + 0.5 - 0.5 * self.width as f64) / self.focal;
        let cy = -(y + 0.5 - 0.5 * self.height as f64) / self.focal;
        let local = [cx, cy, -1.0];
        let r = &self.rotation;
        let world = [
            r[0][0] * local[0] + r[0][1] * local[1] + r[0][2] * local[2],
            r[1][0] * local[0] + r[1][1] * local[1] + r[1][2] * local[2],
            r[2][0] * local[0] + r[2][1] * local[1] + r[2][2] * local[2],
        ];
        math::normalize(world)
    }

    /// One ray per pixel (row-major), `None` where the ray misses `bounds`.
    pub fn rays(&self, bounds: &Bounds) -> Vec<Option<Ray>> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| bounds.ray(self.position, self.pixel_dir(x as f64, y as f64)))
            .collect()
    }

    /// Same camera at a reduced resolution (focal scaled to keep the field
    /// of view).
    pub fn downscaled(&self, factor: usize) -> Camera {
        let factor = factor.max(1);
        Camera {
            width: (self.width / factor).max(1),
            height: (self.height / factor).max(1),
            focal: self.focal * (self.width / factor).max(1) as f64 / self.width as f64,
            ..*self
        }
    }
}

/// Cameras on a circular arc around the scene center, all looking at it.
/// Azimuth is measured in degrees from `+z` towards `+x`; elevation from the
/// horizontal plane towards `+y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRing {
    pub radius: f64,
    pub elevation_deg: f64,
    pub azimuth_start_deg: f64,
    pub azimuth_end_deg: f64,
    /// Uniform random offset added to each azimuth, in degrees.
    pub jitter_deg: f64,
    pub width: usize,
    pub height: usize,
    /// Focal length as a multiple of the image width.
    pub focal_factor: f64,
}

impl CameraRing {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            radius: 3.0,
            elevation_deg: 20.0,
            azimuth_start_deg: 0.0,
            azimuth_end_deg: 360.0,
            jitter_deg: 0.0,
            width,
            height,
            focal_factor: 1.2,
        }
    }

    /// Arc restricted to `|azimuth| <= half_span` around `+z`.
    pub fn front(width: usize, height: usize, half_span_deg: f64) -> Self {
        Self {
            azimuth_start_deg: -half_span_deg,
            azimuth_end_deg: half_span_deg,
            ..Self::full(width, height)
        }
    }

    /// Arc restricted to `|azimuth - 180| <= half_span`.
    pub fn back(width: usize, height: usize, half_span_deg: f64) -> Self {
        Self {
            azimuth_start_deg: 180.0 - half_span_deg,
            azimuth_end_deg: 180.0 + half_span_deg,
            ..Self::full(width, height)
        }
    }

    /// Evenly spaced azimuths: a closed ring excludes its duplicate end
    /// point, an open arc includes both ends.
    pub fn azimuths(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let span = self.azimuth_end_deg - self.azimuth_start_deg;
        let closed = span.abs() >= 360.0 - 1e-9;
        let step = match (closed, n) {
            (_, 0) => 0.0,
            (true, _) => span / n as f64,
            (false, 1) => 0.0,
            (false, _) => span / (n - 1) as f64,
        };
        let offset = if !closed && n == 1 { 0.5 * span } else { 0.0 };
        (0..n)
            .map(|i| {
                let j = if self.jitter_deg > 0.0 {
                    rng.random_range(-self.jitter_deg..self.jitter_deg)
                } else {
                    0.0
                };
                self.azimuth_start_deg + offset + i as f64 * step + j
            })
            .collect()
    }

    pub fn camera_at(&self, azimuth_deg: f64, center: Vec3) -> Result<Camera, SceneError> {
        let (az, el) = (azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        let offset = [
            self.radius * el.cos() * az.sin(),
            self.radius * el.sin(),
            self.radius * el.cos() * az.cos(),
        ];
        Camera::look_at(
            math::add(center, offset),
            center,
            [0.0, 1.0, 0.0],
            self.focal_factor * self.width as f64,
            self.width,
            self.height,
        )
    }

    pub fn cameras(&self, n: usize, center: Vec3, rng: &mut impl Rng) -> Result<Vec<Camera>, SceneError> {
        self.azimuths(n, rng)
            .into_iter()
            .map(|a| self.camera_at(a, center))
            .collect()
    }
}

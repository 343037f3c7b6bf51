//! Analytic synthetic scenes with exact ground truth, pinhole cameras, view
//! generation and controlled corruption of training images.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{self, Vec3};
use crate::render::{Ray, RenderError};

mod camera;
mod dataset;
mod views;

pub use camera::{Camera, CameraRing};
pub use dataset::{Dataset, DatasetConfig};
pub use views::{
    generate_views, inject_aleatoric, inject_transients, region_mask, render_view, NoiseRegion, View,
    ViewSet,
};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("cannot parse scene file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: Vec3 },
}

/// Constant-density, constant-albedo solid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub center: Vec3,
    pub density: f64,
    pub albedo: [f64; 3],
}

impl Primitive {
    /// Parameter interval `[t0, t1]` where `o + t d` is inside the solid.
    pub fn hit_interval(&self, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
        let rel = math::sub(o, self.center);
        match self.shape {
            Shape::Sphere { radius } => {
                let b = math::dot(rel, d);
                let c = math::dot(rel, rel) - radius * radius;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                Some((-b - s, -b + s))
            }
            Shape::Box { half_extents } => slab(rel, d, math::scale(half_extents, -1.0), half_extents),
        }
    }

    fn extent(&self) -> (Vec3, Vec3) {
        let h = match self.shape {
            Shape::Sphere { radius } => [radius; 3],
            Shape::Box { half_extents } => half_extents,
        };
        (math::sub(self.center, h), math::add(self.center, h))
    }
}

fn slab(o: Vec3, d: Vec3, lo: Vec3, hi: Vec3) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-300 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let a = (lo[k] - o[k]) / d[k];
        let b = (hi[k] - o[k]) / d[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 < t1).then_some((t0, t1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn center(&self) -> Vec3 {
        math::scale(math::add(self.min, self.max), 0.5)
    }

    /// Positive-depth part of the ray inside the box.
    pub fn clip(&self, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
        let (t0, t1) = slab(o, d, self.min, self.max)?;
        let t0 = t0.max(1e-6);
        (t1 > t0).then_some((t0, t1))
    }

    pub fn ray(&self, o: Vec3, d: Vec3) -> Option<Ray> {
        let (t0, t1) = self.clip(o, d)?;
        Ray::new(o, d, t0, t1).ok()
    }

    fn contains_box(&self, lo: Vec3, hi: Vec3) -> bool {
        (0..3).all(|k| lo[k] >= self.min[k] - 1e-12 && hi[k] <= self.max[k] + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub background: [f64; 3],
    pub bounds: Bounds,
    pub primitives: Vec<Primitive>,
}

/// Ground truth along one ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtPixel {
    pub color: [f64; 3],
    pub opacity: f64,
    /// Weight-averaged depth, or `None` when nothing is hit.
    pub depth: Option<f64>,
}

/// Quadrature resolution used for ground-truth renders.
pub const GT_SAMPLES: usize = 512;

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            background: [0.5; 3],
            bounds: Bounds {
                min: [-1.0; 3],
                max: [1.0; 3],
            },
            primitives: vec![
                Primitive {
                    shape: Shape::Sphere { radius: 0.45 },
                    center: [-0.4, 0.1, 0.2],
                    density: 30.0,
                    albedo: [0.85, 0.25, 0.2],
                },
                Primitive {
                    shape: Shape::Sphere { radius: 0.3 },
                    center: [0.45, 0.35, -0.25],
                    density: 30.0,
                    albedo: [0.2, 0.45, 0.9],
                },
                Primitive {
                    shape: Shape::Box {
                        half_extents: [0.7, 0.12, 0.6],
                    },
                    center: [0.0, -0.55, 0.0],
                    density: 30.0,
                    albedo: [0.9, 0.85, 0.3],
                },
            ],
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Invalid(m));
        if !in_unit(&self.background) {
            return bad("background outside [0,1]".into());
        }
        if (0..3).any(|k| !(self.bounds.min[k] < self.bounds.max[k])) {
            return bad("bounds min must be below max".into());
        }
        for (i, p) in self.primitives.iter().enumerate() {
            if !(p.density >= 0.0) || !p.density.is_finite() {
                return bad(format!("primitive {i}: density must be finite and >= 0"));
            }
            if !in_unit(&p.albedo) {
                return bad(format!("primitive {i}: albedo outside [0,1]"));
            }
            let size_ok = match p.shape {
                Shape::Sphere { radius } => radius > 0.0,
                Shape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            };
            if !size_ok || !math::is_finite(p.center) {
                return bad(format!("primitive {i}: bad size or center"));
            }
            let (lo, hi) = p.extent();
            if !self.bounds.contains_box(lo, hi) {
                return bad(format!("primitive {i} extends outside the bounds"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, SceneError> {
        let s: SceneSpec = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Renders the analytic scene along `o + t d` with `n` quadrature bins
    /// between the bound crossings. Each bin uses its exact mean density, so
    /// transmittance is exact at bin edges.
    pub fn ground_truth_pixel(&self, o: Vec3, d: Vec3, n: usize) -> Result<GtPixel, SceneError> {
        if n < 256 {
            return Err(SceneError::Invalid(format!("ground truth needs >= 256 samples, got {n}")));
        }
        let miss = GtPixel {
            color: self.background,
            opacity: 0.0,
            depth: None,
        };
        let Some((t0, t1)) = self.bounds.clip(o, d) else {
            return Ok(miss);
        };
        let hits: Vec<(f64, f64, &Primitive)> = self
            .primitives
            .iter()
            .filter(|p| p.density > 0.0)
            .filter_map(|p| p.hit_interval(o, d).map(|(a, b)| (a.max(t0), b.min(t1), p)))
            .filter(|(a, b, _)| b > a)
            .collect();
        if hits.is_empty() {
            return Ok(miss);
        }
        let step = (t1 - t0) / n as f64;
        let mut trans = 1.0;
        let mut color = [0.0; 3];
        let (mut opacity, mut depth) = (0.0, 0.0);
        for i in 0..n {
            let a = t0 + i as f64 * step;
            let b = a + step;
            let mut tau = 0.0;
            let mut emit = [0.0; 3];
            for &(h0, h1, p) in &hits {
                let overlap = (h1.min(b) - h0.max(a)).max(0.0);
                if overlap > 0.0 {
                    let t = p.density * overlap;
                    tau += t;
                    for k in 0..3 {
                        emit[k] += t * p.albedo[k];
                    }
                }
            }
            if tau == 0.0 {
                continue;
            }
            let w = trans * -(-tau).exp_m1();
            for k in 0..3 {
                color[k] += w * emit[k] / tau;
            }
            opacity += w;
            depth += w * (a + 0.5 * step);
            trans *= (-tau).exp();
        }
        for (c, bg) in color.iter_mut().zip(self.background) {
            *c += (1.0 - opacity) * bg;
        }
        Ok(GtPixel {
            color,
            opacity,
            depth: (opacity > 0.0).then(|| depth / opacity),
        })
    }
}

fn in_unit(c: &[f64; 3]) -> bool {
    c.iter().all(|x| (0.0..=1.0).contains(x))
}

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Camera, CameraRing, SceneError, SceneSpec, GT_SAMPLES};
use crate::image::{Image, Mask};
use crate::math::{self, Vec3};

/// One rendered view with its ground truth and corruption masks.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: Camera,
    /// Image used for training or evaluation (possibly corrupted).
    pub image: Image,
    /// Uncorrupted render.
    pub clean: Image,
    /// Pixels whose ray hits the scene (ground-truth opacity above one half).
    pub foreground: Mask,
    /// Weight-averaged ground-truth depth per pixel.
    pub depth: Vec<Option<f64>>,
    pub noise_mask: Mask,
    pub transient_mask: Mask,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViewSet {
    pub views: Vec<View>,
}

impl ViewSet {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Canonical little-endian serialization, for hashing and equality
    /// checks across runs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in &self.views {
            let c = &v.camera;
            for row in &c.rotation {
                for x in row {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            for x in c.position {
                out.extend_from_slice(&x.to_le_bytes());
            }
            out.extend_from_slice(&c.focal.to_le_bytes());
            out.extend_from_slice(&(c.width as u64).to_le_bytes());
            out.extend_from_slice(&(c.height as u64).to_le_bytes());
            for img in [&v.image, &v.clean] {
                for p in &img.pixels {
                    for x in p {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
            for m in [&v.foreground, &v.noise_mask, &v.transient_mask] {
                out.extend(m.iter().map(|&b| b as u8));
            }
        }
        out
    }
}

/// Renders clean ground-truth views from cameras placed by `ring`.
pub fn generate_views(
    scene: &SceneSpec,
    ring: &CameraRing,
    n_views: usize,
    rng: &mut impl Rng,
) -> Result<ViewSet, SceneError> {
    if n_views == 0 {
        return Err(SceneError::Invalid("need at least one view".into()));
    }
    let cams = ring.cameras(n_views, scene.bounds.center(), rng)?;
    let views = cams
        .into_iter()
        .map(|c| render_view(scene, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ViewSet { views })
}

/// Ground-truth render of `scene` seen from `camera`.
pub fn render_view(scene: &SceneSpec, camera: Camera) -> Result<View, SceneError> {
    let (w, h) = (camera.width, camera.height);
    let gt = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let d = camera.pixel_dir((i % w) as f64, (i / w) as f64);
            scene.ground_truth_pixel(camera.position, d, GT_SAMPLES)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let image = Image::from_pixels(w, h, gt.iter().map(|g| g.color).collect());
    Ok(View {
        camera,
        clean: image.clone(),
        image,
        foreground: gt.iter().map(|g| g.opacity > 0.5).collect(),
        depth: gt.iter().map(|g| g.depth).collect(),
        noise_mask: vec![false; w * h],
        transient_mask: vec![false; w * h],
    })
}

/// Where aleatoric noise is injected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseRegion {
    All,
    /// Left half of every image.
    LeftHalf,
    /// Axis-aligned rectangle in fractions of the image size.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Foreground pixels whose surface point `p` has `normal · p > offset`,
    /// so the region is consistent across viewpoints.
    HalfSpace { normal: Vec3, offset: f64 },
}

/// Pixels of `view` that fall in `region`.
pub fn region_mask(view: &View, region: NoiseRegion) -> Mask {
    let (w, h) = (view.image.width, view.image.height);
    (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            match region {
                NoiseRegion::All => true,
                NoiseRegion::LeftHalf => x < w / 2,
                NoiseRegion::Rect { x0, y0, x1, y1 } => {
                    let (fx, fy) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
                    fx >= x0 && fx < x1 && fy >= y0 && fy < y1
                }
                NoiseRegion::HalfSpace { normal, offset } => match view.depth[i] {
                    Some(t) if view.foreground[i] => {
                        let cam = &view.camera;
                        let p = math::add(cam.position, math::scale(cam.pixel_dir(x as f64, y as f64), t));
                        math::dot(normal, p) > offset
                    }
                    _ => false,
                },
            }
        })
        .collect()
}

/// Adds `N(0, σ²)` noise to every channel of the pixels in `region`,
/// clamped to `[0, 1]`. Pixels already covered by a transient are skipped.
pub fn inject_aleatoric(
    mut views: ViewSet,
    region: NoiseRegion,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<ViewSet, SceneError> {
    if !(sigma >= 0.0) {
        return Err(SceneError::Invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(views);
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in &mut views.views {
        let mask = region_mask(v, region);
        for (i, &m) in mask.iter().enumerate() {
            if !m || v.transient_mask[i] {
                continue;
            }
            for c in v.image.pixels[i].iter_mut() {
                *c = (*c + normal.sample(rng)).clamp(0.0, 1.0);
            }
            v.noise_mask[i] = true;
        }
    }
    Ok(views)
}

/// Paints `count` solid rectangles of random color per view, each side
/// between 15% and 30% of the image. Pixels already carrying noise are left
/// alone so the two masks stay disjoint.
pub fn inject_transients(mut views: ViewSet, count: usize, rng: &mut impl Rng) -> ViewSet {
    for v in &mut views.views {
        let (w, h) = (v.image.width, v.image.height);
        for _ in 0..count {
            let rw = ((w as f64 * rng.random_range(0.15..0.3)).round() as usize).clamp(1, w);
            let rh = ((h as f64 * rng.random_range(0.15..0.3)).round() as usize).clamp(1, h);
            let x0 = rng.random_range(0..=w - rw);
            let y0 = rng.random_range(0..=h - rh);
            let color = [rng.random(), rng.random(), rng.random()];
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    let i = y * w + x;
                    if v.noise_mask[i] {
                        continue;
                    }
                    v.image.pixels[i] = color;
                    v.transient_mask[i] = true;
                }
            }
        }
    }
    views
}

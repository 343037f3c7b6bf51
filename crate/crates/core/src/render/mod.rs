//! Ray sampling, volume-rendering weights, and propagation of point-level
//! uncertainty to pixels.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::{ParamStore, Tape};
use crate::evidential::{NigVars, RgbNig};
use crate::field::{self, FieldError, FieldParams, FieldVars, PointPrediction};
use crate::math::{self, Vec3};

mod tape;

pub use tape::{render_rays_var, PixelVars};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid ray: {0}")]
    InvalidRay(&'static str),
    #[error("at least one sample per ray is required")]
    ZeroSamples,
    #[error("negative density {0} at sample {1}")]
    NegativeDensity(f64, usize),
    #[error("non-positive interval {0} at sample {1}")]
    BadInterval(f64, usize),
    #[error("{0} weights for {1} points")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Samples per ray.
    pub samples: usize,
    pub background: [f64; 3],
    /// Floor on point and pixel uncertainties.
    pub eps_u: f64,
    /// Rays whose total weight falls below this are treated as empty.
    pub eps_w: f64,
    /// Epistemic uncertainty reported for empty rays.
    pub eu_max: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            background: [0.5; 3],
            eps_u: 1e-6,
            eps_w: 1e-8,
            eu_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3, t_near: f64, t_far: f64) -> Result<Self, RenderError> {
        let r = Self {
            origin,
            dir,
            t_near,
            t_far,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !math::is_finite(self.origin) || !math::is_finite(self.dir) {
            return Err(RenderError::InvalidRay("non-finite origin or direction"));
        }
        if (math::norm(self.dir) - 1.0).abs() > 1e-6 {
            return Err(RenderError::InvalidRay("direction is not unit length"));
        }
        if !(self.t_near > 0.0 && self.t_near < self.t_far && self.t_far.is_finite()) {
            return Err(RenderError::InvalidRay("need 0 < t_near < t_far"));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Vec3 {
        math::add(self.origin, math::scale(self.dir, t))
    }
}

/// One uniform draw in each of `n` equal bins of `[t_near, t_far]`.
pub fn sample_stratified(ray: &Ray, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>, RenderError> {
    if n == 0 {
        return Err(RenderError::ZeroSamples);
    }
    let bin = (ray.t_far - ray.t_near) / n as f64;
    Ok((0..n)
        .map(|i| {
            // open interval so neighbouring bins never produce equal depths
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            ray.t_near + (i as f64 + u) * bin
        })
        .collect())
}

/// Bin midpoints, the deterministic counterpart of [`sample_stratified`].
pub fn sample_midpoints(ray: &Ray, n: usize) -> Result<Vec<f64>, RenderError> {
    if n == 0 {
        return Err(RenderError::ZeroSamples);
    }
    let bin = (ray.t_far - ray.t_near) / n as f64;
    Ok((0..n).map(|i| ray.t_near + (i as f64 + 0.5) * bin).collect())
}

/// Gaps between consecutive depths; the last one runs to `t_far`.
pub fn intervals(depths: &[f64], t_far: f64) -> Vec<f64> {
    let mut out: Vec<f64> = depths.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(&last) = depths.last() {
        out.push(t_far - last);
    }
    out
}

/// `w_i = exp(-Σ_{j<i} ρ_j δ_j) (1 - exp(-ρ_i δ_i))`.
pub fn compute_weights(densities: &[f64], deltas: &[f64]) -> Result<Vec<f64>, RenderError> {
    if densities.len() != deltas.len() {
        return Err(RenderError::LengthMismatch(deltas.len(), densities.len()));
    }
    let mut optical = 0.0f64;
    let mut out = Vec::with_capacity(densities.len());
    for (i, (&rho, &delta)) in densities.iter().zip(deltas).enumerate() {
        if rho.is_nan() || rho < 0.0 {
            return Err(RenderError::NegativeDensity(rho, i));
        }
        if delta.is_nan() || delta <= 0.0 {
            return Err(RenderError::BadInterval(delta, i));
        }
        let tau = rho * delta;
        out.push((-optical).exp() * -(-tau).exp_m1());
        optical += tau;
    }
    Ok(out)
}

/// Depths, intervals and weights along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySamples {
    pub depths: Vec<f64>,
    pub intervals: Vec<f64>,
    pub weights: Vec<f64>,
    /// Weights divided by their sum; absent for empty rays.
    pub normalized: Option<Vec<f64>>,
}

impl RaySamples {
    pub fn new(depths: Vec<f64>, t_far: f64, densities: &[f64], eps_w: f64) -> Result<Self, RenderError> {
        let intervals = intervals(&depths, t_far);
        let weights = compute_weights(densities, &intervals)?;
        let sum: f64 = weights.iter().sum();
        let normalized = (sum >= eps_w).then(|| weights.iter().map(|w| w / sum).collect());
        Ok(Self {
            depths,
            intervals,
            weights,
            normalized,
        })
    }
}

/// Rendered pixel with its NIG parameters. Uncertainties are shared by the
/// three color channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelEvidential {
    pub mean_color: [f64; 3],
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
    pub gamma: [f64; 3],
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Sum of the rendering weights.
    pub opacity: f64,
    /// Set when the ray carried too little weight and the background
    /// fallback was used.
    pub empty: bool,
}

impl PixelEvidential {
    pub fn nig(&self) -> RgbNig {
        RgbNig {
            gamma: self.gamma,
            nu: self.nu,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    fn fallback(cfg: &RenderConfig, opacity: f64) -> Self {
        let (au, eu, alpha) = (cfg.eps_u, cfg.eu_max, 2.0);
        Self {
            mean_color: cfg.background,
            total: au + eu,
            aleatoric: au,
            epistemic: eu,
            gamma: cfg.background,
            nu: au / eu,
            alpha,
            beta: au * (alpha - 1.0),
            opacity,
            empty: true,
        }
    }
}

/// Combines per-point predictions into a pixel:
/// `c̄ = Σ w c̄_i + (1 - Σw) bg`, `AU = Σ w² AU_i`, `EU = Σ w² EU_i`,
/// `α = 1 + Σ w̃ α̃_i`, `ν = AU/EU`, `β = AU(α - 1)`.
pub fn composite(
    weights: &[f64],
    points: &[PointPrediction],
    cfg: &RenderConfig,
) -> Result<PixelEvidential, RenderError> {
    if weights.len() != points.len() {
        return Err(RenderError::LengthMismatch(weights.len(), points.len()));
    }
    let opacity: f64 = weights.iter().sum();
    if !(opacity >= cfg.eps_w) {
        return Ok(PixelEvidential::fallback(cfg, opacity));
    }
    let mut color = [0.0; 3];
    let (mut au, mut eu, mut shape) = (0.0, 0.0, 0.0);
    for (&w, p) in weights.iter().zip(points) {
        for (c, pc) in color.iter_mut().zip(p.mean_color) {
            *c += w * pc;
        }
        au += w * w * p.aleatoric;
        eu += w * w * p.epistemic;
        shape += w * p.shape_score;
    }
    let rest = 1.0 - opacity;
    for (c, bg) in color.iter_mut().zip(cfg.background) {
        *c += rest * bg;
    }
    let alpha = 1.0 + shape / opacity;
    Ok(PixelEvidential {
        mean_color: color,
        total: au + eu,
        aleatoric: au,
        epistemic: eu,
        gamma: color,
        nu: au / eu,
        alpha,
        beta: au * (alpha - 1.0),
        opacity,
        empty: false,
    })
}

/// How depths are chosen along each ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Midpoint,
    /// Stratified with a per-ray generator derived from this seed.
    Stratified(u64),
}

pub(crate) fn depths_for(ray: &Ray, n: usize, sampling: Sampling, ray_index: usize) -> Result<Vec<f64>, RenderError> {
    match sampling {
        Sampling::Midpoint => sample_midpoints(ray, n),
        Sampling::Stratified(seed) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ray_index as u64);
            sample_stratified(ray, n, &mut rng)
        }
    }
}

const RAYS_PER_CHUNK: usize = 128;

/// Per-ray samples and point predictions, for callers that post-process
/// points before compositing.
#[derive(Debug, Clone)]
pub struct RayPoints {
    pub depths: Vec<f64>,
    pub points: Vec<PointPrediction>,
}

/// Evaluates the field at every sample of every ray.
pub fn query_rays(
    params: &FieldParams,
    rays: &[Ray],
    samples: usize,
    sampling: Sampling,
) -> Result<Vec<RayPoints>, RenderError> {
    if samples == 0 {
        return Err(RenderError::ZeroSamples);
    }
    let chunks: Vec<Result<Vec<RayPoints>, RenderError>> = rays
        .par_chunks(RAYS_PER_CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut depths = Vec::with_capacity(chunk.len());
            let mut pos = Vec::with_capacity(chunk.len() * samples);
            let mut dirs = Vec::with_capacity(chunk.len() * samples);
            for (k, ray) in chunk.iter().enumerate() {
                ray.validate()?;
                let t = depths_for(ray, samples, sampling, ci * RAYS_PER_CHUNK + k)?;
                for &ti in &t {
                    pos.push(ray.at(ti));
                    dirs.push(ray.dir);
                }
                depths.push(t);
            }
            let preds = field::evaluate_points(params, &pos, &dirs)?;
            Ok(depths
                .into_iter()
                .zip(preds.chunks(samples))
                .map(|(depths, p)| RayPoints {
                    depths,
                    points: p.to_vec(),
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(rays.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Renders every ray with the evidential compositing rule.
pub fn render_rays(
    params: &FieldParams,
    rays: &[Ray],
    cfg: &RenderConfig,
    sampling: Sampling,
) -> Result<Vec<PixelEvidential>, RenderError> {
    render_rays_with(params, rays, cfg, sampling, |_| {})
}

/// As [`render_rays`], passing every point prediction through `adjust`
/// before weights are computed.
pub fn render_rays_with(
    params: &FieldParams,
    rays: &[Ray],
    cfg: &RenderConfig,
    sampling: Sampling,
    adjust: impl Fn(&mut PointPrediction) + Sync,
) -> Result<Vec<PixelEvidential>, RenderError> {
    let queried = query_rays(params, rays, cfg.samples, sampling)?;
    queried
        .into_par_iter()
        .zip(rays.par_iter())
        .map(|(mut rp, ray)| {
            rp.points.iter_mut().for_each(&adjust);
            let rho: Vec<f64> = rp.points.iter().map(|p| p.density).collect();
            let s = RaySamples::new(rp.depths, ray.t_far, &rho, cfg.eps_w)?;
            composite(&s.weights, &rp.points, cfg)
        })
        .collect()
}

pub(crate) fn field_on_tape(
    tape: &mut Tape,
    params: &FieldParams,
    store: &ParamStore,
    positions: &[Vec3],
    directions: &[Vec3],
) -> FieldVars {
    let l_pos = params.config.l_pos;
    let l_dir = params.config.l_dir;
    let pe = tape.constant(field::encode_batch(positions, l_pos));
    let de = tape.constant(field::encode_batch(directions, l_dir));
    field::forward_with_store(tape, params, store, pe, de)
}

pub(crate) fn row_mask(values: &Array2<f64>, pred: impl Fn(f64) -> bool) -> Arc<Vec<bool>> {
    Arc::new(values.column(0).iter().map(|&x| pred(x)).collect())
}

pub(crate) fn nig_vars(p: &PixelVars) -> NigVars {
    NigVars {
        gamma: p.rgb,
        nu: p.nu,
        alpha: p.alpha,
        beta: p.beta,
    }
}

#[cfg(test)]
mod tests;

//! Differentiable rendering of a ray batch, for training.

use std::sync::Arc;

use ndarray::Array2;

use super::{field_on_tape, intervals, row_mask, Ray, RenderConfig};
use crate::autodiff::{ParamStore, Tape, Var};
use crate::field::FieldParams;

/// Pixel quantities for `R` rays recorded on a tape. `rgb` is `R×3`, the
/// rest `R×1`.
#[derive(Debug, Clone)]
pub struct PixelVars {
    pub rgb: Var,
    pub aleatoric: Var,
    pub epistemic: Var,
    pub nu: Var,
    pub alpha: Var,
    pub beta: Var,
    pub opacity: Var,
    /// Rows that fell back to the background.
    pub empty: Arc<Vec<bool>>,
}

/// Records field evaluation and compositing for `rays` sampled at `depths`
/// (every ray must have the same number of depths). Matches
/// [`super::composite`] value for value, including the empty-ray fallback.
pub fn render_rays_var(
    tape: &mut Tape,
    params: &FieldParams,
    store: &ParamStore,
    rays: &[Ray],
    depths: &[Vec<f64>],
    cfg: &RenderConfig,
) -> PixelVars {
    assert_eq!(rays.len(), depths.len());
    let r = rays.len();
    let n = depths.first().map_or(0, Vec::len);
    assert!(n > 0 && depths.iter().all(|d| d.len() == n), "ragged depths");

    let mut pos = Vec::with_capacity(r * n);
    let mut dirs = Vec::with_capacity(r * n);
    let mut delta = Array2::zeros((r, n));
    for (i, (ray, t)) in rays.iter().zip(depths).enumerate() {
        for (j, d) in intervals(t, ray.t_far).into_iter().enumerate() {
            delta[[i, j]] = d;
        }
        for &ti in t {
            pos.push(ray.at(ti));
            dirs.push(ray.dir);
        }
    }
    let out = field_on_tape(tape, params, store, &pos, &dirs);

    // weights, R×N
    let rho = tape.reshape(out.density, r, n);
    let delta = tape.constant(delta);
    let tau = tape.mul(rho, delta);
    let optical = tape.exclusive_cumsum(tau);
    let neg = tape.neg(optical);
    let trans = tape.exp(neg);
    let absorb = tape.one_minus_exp_neg(tau);
    let w = tape.mul(trans, absorb);
    let w2 = tape.square(w);
    let opacity = tape.row_sum(w);

    let per_ray = |tape: &mut Tape, point_col: Var, weights: Var| {
        let m = tape.reshape(point_col, r, n);
        let prod = tape.mul(m, weights);
        tape.row_sum(prod)
    };

    let mut channels = [opacity; 3];
    for (k, ch) in channels.iter_mut().enumerate() {
        let col = tape.slice_cols(out.rgb, k, 1);
        *ch = per_ray(tape, col, w);
    }
    let color = tape.concat_cols(&channels);
    let rest = tape.neg(opacity);
    let rest = tape.offset(rest, 1.0);
    let bg = Array2::from_shape_fn((r, 3), |(_, k)| cfg.background[k]);
    let bg = tape.constant(bg);
    let bg_part = tape.mul_col(bg, rest);
    let color = tape.add(color, bg_part);

    let au = per_ray(tape, out.aleatoric, w2);
    let eu = per_ray(tape, out.epistemic, w2);
    let shape = per_ray(tape, out.shape_score, w);

    let lit = row_mask(tape.value(opacity), |o| o >= cfg.eps_w);
    let empty = Arc::new(lit.iter().map(|&b| !b).collect::<Vec<_>>());
    let fill = |tape: &mut Tape, x: f64, cols: usize| tape.constant(Array2::from_elem((r, cols), x));

    let ones = fill(tape, 1.0, 1);
    let safe_opacity = tape.select(lit.clone(), opacity, ones);
    let shape_mean = tape.div(shape, safe_opacity);
    let alpha_lit = tape.offset(shape_mean, 1.0);
    let two = fill(tape, 2.0, 1);
    let alpha = tape.select(lit.clone(), alpha_lit, two);

    let au_fb = fill(tape, cfg.eps_u, 1);
    let aleatoric = tape.select(lit.clone(), au, au_fb);
    let eu_fb = fill(tape, cfg.eu_max, 1);
    let epistemic = tape.select(lit.clone(), eu, eu_fb);
    let bg_fb = Array2::from_shape_fn((r, 3), |(_, k)| cfg.background[k]);
    let bg_fb = tape.constant(bg_fb);
    let rgb = tape.select(lit, color, bg_fb);

    let nu = tape.div(aleatoric, epistemic);
    let am1 = tape.offset(alpha, -1.0);
    let beta = tape.mul(aleatoric, am1);

    PixelVars {
        rgb,
        aleatoric,
        epistemic,
        nu,
        alpha,
        beta,
        opacity,
        empty,
    }
}

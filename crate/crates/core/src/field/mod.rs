//! The evidential radiance field: positional encoding plus a small MLP that
//! maps a point and a viewing direction to mean color, aleatoric and
//! epistemic uncertainty, shape score and density.
//!
//! Layout: a softplus trunk over the encoded position, a density head on
//! the trunk output, and one linear head over `[trunk, encoded direction]`
//! producing six values (RGB logits, then AU, EU and shape-score
//! pre-activations). Density never sees the direction.

mod checkpoint;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::math::{self, Vec3};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("viewing direction is not unit length (|d| = {0})")]
    NonUnitDirection(f64),
    #[error("non-finite field input")]
    NonFiniteInput,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Frequency count for the position encoding.
    pub l_pos: usize,
    /// Frequency count for the direction encoding.
    pub l_dir: usize,
    pub width: usize,
    /// Number of hidden trunk layers.
    pub depth: usize,
    /// Floor added to AU, EU and shape score after softplus.
    pub eps_u: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            l_pos: 6,
            l_dir: 2,
            width: 64,
            depth: 4,
            eps_u: 1e-6,
        }
    }
}

impl FieldConfig {
    pub fn pos_dim(&self) -> usize {
        3 + 6 * self.l_pos
    }

    pub fn dir_dim(&self) -> usize {
        3 + 6 * self.l_dir
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Number of outputs of the color/uncertainty head.
pub const HEAD_OUTPUTS: usize = 6;

/// Initial biases of the AU, EU and shape-score outputs (head columns 3..6).
/// Small starting variances with a large shape score keep the pixel NLL close
/// to a Gaussian early on; with zero biases the Student-t tails absorb the
/// color error and fitting stalls.
pub const UNCERTAINTY_BIAS_INIT: [f64; 3] = [-3.0, -3.0, 5.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FieldParams {
    pub config: FieldConfig,
    pub store: ParamStore,
    pub trunk: Vec<Linear>,
    pub density: Linear,
    pub head: Linear,
}

fn add_linear(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Linear {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
    let b = Array2::from_shape_fn((1, fan_out), |_| rng.random_range(-bound..bound));
    Linear {
        weight: store.insert(format!("{name}.weight"), w),
        bias: store.insert(format!("{name}.bias"), b),
    }
}

impl FieldParams {
    /// Uniform `±1/√fan_in` initialization of every layer.
    pub fn init(config: FieldConfig, rng: &mut impl Rng) -> Self {
        let mut store = ParamStore::new();
        let mut trunk = Vec::with_capacity(config.depth);
        let mut fan_in = config.pos_dim();
        for i in 0..config.depth {
            trunk.push(add_linear(&mut store, &format!("trunk.{i}"), fan_in, config.width, rng));
            fan_in = config.width;
        }
        let density = add_linear(&mut store, "density", fan_in, 1, rng);
        let head = add_linear(
            &mut store,
            "head",
            fan_in + config.dir_dim(),
            HEAD_OUTPUTS,
            rng,
        );
        for (k, b) in UNCERTAINTY_BIAS_INIT.iter().enumerate() {
            store.value_mut(head.bias)[[0, 3 + k]] = *b;
        }
        Self {
            config,
            store,
            trunk,
            density,
            head,
        }
    }

    /// Sets both output layers to zero.
    pub fn zero_output_layers(&mut self) {
        for l in [self.density, self.head] {
            self.store.value_mut(l.weight).fill(0.0);
            self.store.value_mut(l.bias).fill(0.0);
        }
    }

    pub fn trunk_output_dim(&self) -> usize {
        if self.trunk.is_empty() {
            self.config.pos_dim()
        } else {
            self.config.width
        }
    }
}

/// Per-sample field output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPrediction {
    pub mean_color: [f64; 3],
    pub aleatoric: f64,
    pub epistemic: f64,
    pub shape_score: f64,
    pub density: f64,
}

/// `[p, sin(2^k π p), cos(2^k π p)]` for `k = 0..levels`, componentwise.
pub fn positional_encode(p: Vec3, levels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 + 6 * levels);
    encode_into(p, levels, &mut out);
    out
}

fn encode_into(p: Vec3, levels: usize, out: &mut Vec<f64>) {
    out.extend_from_slice(&p);
    if levels == 0 {
        return;
    }
    let mut sin = p.map(|x| (std::f64::consts::PI * x).sin());
    let mut cos = p.map(|x| (std::f64::consts::PI * x).cos());
    for level in 0..levels {
        out.extend_from_slice(&sin);
        out.extend_from_slice(&cos);
        if level + 1 < levels {
            // double-angle step; drifts by a few ulps per level
            for k in 0..3 {
                let (s, c) = (sin[k], cos[k]);
                sin[k] = 2.0 * s * c;
                cos[k] = (c - s) * (c + s);
            }
        }
    }
}

/// Row-wise encoding of many points.
pub fn encode_batch(points: &[Vec3], levels: usize) -> Array2<f64> {
    let dim = 3 + 6 * levels;
    let mut data = Vec::with_capacity(points.len() * dim);
    for &p in points {
        encode_into(p, levels, &mut data);
    }
    Array2::from_shape_vec((points.len(), dim), data).expect("encoding shape")
}

/// Field outputs for `P` points recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct FieldVars {
    /// `P×1`, non-negative.
    pub density: Var,
    /// `P×3`, in `(0, 1)`.
    pub rgb: Var,
    /// `P×1` each, strictly positive.
    pub aleatoric: Var,
    pub epistemic: Var,
    pub shape_score: Var,
}

fn linear(tape: &mut Tape, store: &ParamStore, layer: Linear, x: Var) -> Var {
    let w = tape.param(store, layer.weight);
    let b = tape.param(store, layer.bias);
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

/// Records the field on `tape` for encoded positions and directions.
pub fn forward(tape: &mut Tape, params: &FieldParams, pos_enc: Var, dir_enc: Var) -> FieldVars {
    forward_with_store(tape, params, &params.store, pos_enc, dir_enc)
}

/// As [`forward`], reading parameter values from `store` (which must share
/// the layout of `params.store`).
pub fn forward_with_store(
    tape: &mut Tape,
    params: &FieldParams,
    store: &ParamStore,
    pos_enc: Var,
    dir_enc: Var,
) -> FieldVars {
    let mut h = pos_enc;
    for &layer in &params.trunk {
        let z = linear(tape, store, layer, h);
        h = tape.softplus(z);
    }
    let d = linear(tape, store, params.density, h);
    let density = tape.softplus(d);

    let joined = tape.concat_cols(&[h, dir_enc]);
    let out = linear(tape, store, params.head, joined);
    let logits = tape.slice_cols(out, 0, 3);
    let rgb = tape.sigmoid(logits);
    let eps = params.config.eps_u;
    let mut unc = [rgb; 3];
    for (k, slot) in unc.iter_mut().enumerate() {
        let pre = tape.slice_cols(out, 3 + k, 1);
        let sp = tape.softplus(pre);
        *slot = tape.offset(sp, eps);
    }
    FieldVars {
        density,
        rgb,
        aleatoric: unc[0],
        epistemic: unc[1],
        shape_score: unc[2],
    }
}

fn check_direction(d: Vec3) -> Result<(), FieldError> {
    if !math::is_finite(d) {
        return Err(FieldError::NonFiniteInput);
    }
    let n = math::norm(d);
    if (n - 1.0).abs() > 1e-6 {
        return Err(FieldError::NonUnitDirection(n));
    }
    Ok(())
}

/// Evaluates the field at many `(position, direction)` pairs.
pub fn evaluate_points(
    params: &FieldParams,
    positions: &[Vec3],
    directions: &[Vec3],
) -> Result<Vec<PointPrediction>, FieldError> {
    assert_eq!(positions.len(), directions.len());
    if positions.iter().any(|p| !math::is_finite(*p)) {
        return Err(FieldError::NonFiniteInput);
    }
    for &d in directions {
        check_direction(d)?;
    }
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let pe = tape.constant(encode_batch(positions, params.config.l_pos));
    let de = tape.constant(encode_batch(directions, params.config.l_dir));
    let out = forward(&mut tape, params, pe, de);
    Ok(collect_predictions(&tape, &out))
}

pub(crate) fn collect_predictions(tape: &Tape, out: &FieldVars) -> Vec<PointPrediction> {
    let rgb = tape.value(out.rgb);
    let au = tape.value(out.aleatoric);
    let eu = tape.value(out.epistemic);
    let sh = tape.value(out.shape_score);
    let rho = tape.value(out.density);
    (0..rgb.nrows())
        .map(|i| PointPrediction {
            mean_color: [rgb[[i, 0]], rgb[[i, 1]], rgb[[i, 2]]],
            aleatoric: au[[i, 0]],
            epistemic: eu[[i, 0]],
            shape_score: sh[[i, 0]],
            density: rho[[i, 0]],
        })
        .collect()
}

/// Evaluates the field at one point.
pub fn evaluate_point(params: &FieldParams, x: Vec3, d: Vec3) -> Result<PointPrediction, FieldError> {
    Ok(evaluate_points(params, &[x], &[d])?[0])
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::check_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn small() -> FieldParams {
        let cfg = FieldConfig {
            l_pos: 2,
            l_dir: 1,
            width: 8,
            depth: 2,
            eps_u: 1e-6,
        };
        FieldParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn encoding_examples() {
        assert_eq!(positional_encode([0.0; 3], 1), vec![0., 0., 0., 0., 0., 0., 1., 1., 1.]);
        let e = positional_encode([0.5, 0.0, 0.0], 1);
        assert!((e[3] - 1.0).abs() < 1e-15);
        assert_eq!(positional_encode([0.1, -0.7, 0.3], 6).len(), 39);
        assert_eq!(positional_encode([0.1, -0.7, 0.3], 0), vec![0.1, -0.7, 0.3]);
    }

    #[test]
    fn zero_output_layers_give_activation_constants() {
        let mut p = FieldParams::init(FieldConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        p.zero_output_layers();
        let out = evaluate_point(&p, [0.2, -0.1, 0.4], [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(out.mean_color, [0.5; 3]);
        for u in [out.aleatoric, out.epistemic, out.shape_score] {
            assert!((u - (LN_2 + 1e-6)).abs() < 1e-15);
        }
        assert!((out.density - LN_2).abs() < 1e-15);
    }

    #[test]
    fn layer_shapes_chain() {
        let p = FieldParams::init(FieldConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
        let s = &p.store;
        assert_eq!(s.value(p.trunk[0].weight).dim(), (39, 64));
        assert_eq!(s.value(p.trunk[3].weight).dim(), (64, 64));
        assert_eq!(s.value(p.density.weight).dim(), (64, 1));
        assert_eq!(s.value(p.head.weight).dim(), (64 + 15, 6));
        // 3 color + 3 uncertainty/shape + 1 density
        assert_eq!(s.value(p.head.bias).ncols() + s.value(p.density.bias).ncols(), 7);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = small();
        assert!(matches!(
            evaluate_point(&p, [0.0; 3], [0.0, 0.0, 2.0]),
            Err(FieldError::NonUnitDirection(_))
        ));
        assert!(matches!(
            evaluate_point(&p, [f64::NAN, 0.0, 0.0], [0.0, 0.0, 1.0]),
            Err(FieldError::NonFiniteInput)
        ));
    }

    #[test]
    fn density_is_direction_invariant() {
        let p = small();
        let x = [0.3, -0.2, 0.5];
        let a = evaluate_point(&p, x, [0.0, 0.0, 1.0]).unwrap();
        let b = evaluate_point(&p, x, math::normalize([1.0, -2.0, 0.5])).unwrap();
        assert_eq!(a.density, b.density);
        assert_ne!(a.mean_color, b.mean_color);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = evaluate_point(&small(), [0.1, 0.2, 0.3], [0.0, 1.0, 0.0]).unwrap();
        let b = evaluate_point(&small(), [0.1, 0.2, 0.3], [0.0, 1.0, 0.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_head_passes_gradient_check() {
        let mut p = small();
        let pts = [[0.1, 0.2, -0.3], [-0.5, 0.4, 0.2], [0.7, -0.1, 0.0]];
        let dirs = [
            math::normalize([0.3, -0.2, 1.0]),
            math::normalize([1.0, 0.7, 0.1]),
            math::normalize([-0.4, -1.0, 0.6]),
        ];
        let pe = encode_batch(&pts, p.config.l_pos);
        let de = encode_batch(&dirs, p.config.l_dir);
        let arch = p.clone();
        let heads: [fn(&FieldVars) -> Var; 5] = [
            |o| o.density,
            |o| o.rgb,
            |o| o.aleatoric,
            |o| o.epistemic,
            |o| o.shape_score,
        ];
        for pick in heads {
            let err = check_gradients(&mut p.store, 1e-6, |t, s| {
                let pv = t.constant(pe.clone());
                let dv = t.constant(de.clone());
                let out = forward_with_store(t, &arch, s, pv, dv);
                let v = pick(&out);
                let sq = t.square(v);
                t.sum_all(sq)
            })
            .unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn outputs_continuous_in_position() {
        let p = small();
        let d = [0.0, 0.0, 1.0];
        let a = evaluate_point(&p, [0.2, 0.3, 0.4], d).unwrap();
        let b = evaluate_point(&p, [0.2 + 1e-6, 0.3, 0.4], d).unwrap();
        assert!((a.density - b.density).abs() < 1e-3);
        assert!((a.aleatoric - b.aleatoric).abs() < 1e-3);
    }
}

//! Comparison models sharing the evidential field and renderer: a Gaussian
//! per-pixel likelihood ("normal") and plain color regression ("vanilla").
//! The normal model reads its point variance from the aleatoric head.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::autodiff::{Tape, Var};
use crate::render::{RenderConfig, RenderError};

/// Gaussian pixel prediction with one variance shared by the channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPixel {
    pub mu: [f64; 3],
    pub sigma2: f64,
}

/// `μ = Σ w μ_i + (1 - Σw) bg`, `σ² = max(Σ w² σ_i², ε_u)`, with the same
/// empty-ray fallback as the evidential composite.
pub fn normal_composite(
    weights: &[f64],
    means: &[[f64; 3]],
    variances: &[f64],
    cfg: &RenderConfig,
) -> Result<NormalPixel, RenderError> {
    if weights.len() != means.len() || weights.len() != variances.len() {
        return Err(RenderError::LengthMismatch(weights.len(), means.len()));
    }
    let opacity: f64 = weights.iter().sum();
    if !(opacity >= cfg.eps_w) {
        return Ok(NormalPixel {
            mu: cfg.background,
            sigma2: cfg.eu_max,
        });
    }
    let mut mu = [0.0; 3];
    let mut sigma2 = 0.0;
    for ((&w, m), &v) in weights.iter().zip(means).zip(variances) {
        for (a, b) in mu.iter_mut().zip(m) {
            *a += w * b;
        }
        sigma2 += w * w * v;
    }
    for (a, bg) in mu.iter_mut().zip(cfg.background) {
        *a += (1.0 - opacity) * bg;
    }
    Ok(NormalPixel {
        mu,
        sigma2: sigma2.max(cfg.eps_u),
    })
}

/// Negative log-likelihood summed over channels.
pub fn gaussian_nll(c_gt: [f64; 3], p: &NormalPixel) -> f64 {
    c_gt.iter()
        .zip(p.mu)
        .map(|(c, m)| 0.5 * (2.0 * PI * p.sigma2).ln() + (c - m).powi(2) / (2.0 * p.sigma2))
        .sum()
}

/// Mean squared error over every channel of every pixel.
pub fn mse(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let s: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)))
        .sum();
    s / (3 * a.len()) as f64
}

/// Per-row Gaussian NLL on a tape. `target`, `mu` are `R×3`, `sigma2` is
/// `R×1` and is floored at `eps` first. Returns `R×1`.
pub fn gaussian_nll_var(tape: &mut Tape, target: Var, mu: Var, sigma2: Var, eps: f64) -> Var {
    let rows = tape.shape(sigma2).0;
    let keep = crate::render::row_mask(tape.value(sigma2), |s| s >= eps);
    let floor = tape.constant(Array2::from_elem((rows, 1), eps));
    let s2 = tape.select(keep, sigma2, floor);
    let channels = tape.shape(target).1 as f64;
    let ln_s2 = tape.ln(s2);
    let norm = tape.offset(ln_s2, (2.0 * PI).ln());
    let norm = tape.scale(norm, 0.5 * channels);
    let diff = tape.sub(target, mu);
    let sq = tape.square(diff);
    let sq = tape.row_sum(sq);
    let quad = tape.div(sq, s2);
    let quad = tape.scale(quad, 0.5);
    tape.add(norm, quad)
}

/// Per-row squared error averaged over channels. Returns `R×1`.
pub fn mse_var(tape: &mut Tape, target: Var, pred: Var) -> Var {
    let channels = tape.shape(target).1 as f64;
    let diff = tape.sub(target, pred);
    let sq = tape.square(diff);
    let s = tape.row_sum(sq);
    tape.scale(s, 1.0 / channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_gradients, ParamStore};
    use crate::evidential::total_loss;
    use crate::field::PointPrediction;
    use crate::render::{composite, compute_weights};
    use ndarray::array;

    #[test]
    fn composite_examples() {
        let cfg = RenderConfig::default();
        let p = normal_composite(&[1.0], &[[0.3; 3]], &[0.04], &cfg).unwrap();
        assert!((p.mu[0] - 0.3).abs() < 1e-15 && (p.sigma2 - 0.04).abs() < 1e-15);
        let p = normal_composite(&[0.6, 0.3], &[[0.0; 3]; 2], &[0.01, 0.04], &cfg).unwrap();
        assert!((p.sigma2 - 0.0072).abs() < 1e-15);
        let p = normal_composite(&[0.0], &[[0.3; 3]], &[0.04], &cfg).unwrap();
        assert_eq!(p.mu, cfg.background);
    }

    #[test]
    fn nll_and_mse_examples() {
        let p = NormalPixel {
            mu: [0.2, 0.4, 0.6],
            sigma2: 1.0 / (2.0 * PI),
        };
        assert!(gaussian_nll([0.2, 0.4, 0.6], &p).abs() < 1e-14);
        let img = vec![[0.1, 0.5, 0.9]; 7];
        assert_eq!(mse(&img, &img), 0.0);
        assert!((mse(&[[0.0; 3]], &[[1.0, 0.0, 0.5]]) - 1.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn evidential_reduces_to_normal() {
        let cfg = RenderConfig::default();
        let w = compute_weights(&[0.3, 2.0, 0.7], &[0.4, 0.4, 0.4]).unwrap();
        let pts: Vec<_> = [(0.2, 0.01), (0.7, 0.03), (0.4, 0.02)]
            .iter()
            .map(|&(c, au)| PointPrediction {
                mean_color: [c, c * 0.5, 1.0 - c],
                aleatoric: au,
                epistemic: cfg.eps_u,
                shape_score: 1e7,
                density: 0.0,
            })
            .collect();
        let ev = composite(&w, &pts, &cfg).unwrap();
        let means: Vec<_> = pts.iter().map(|p| p.mean_color).collect();
        let vars: Vec<_> = pts.iter().map(|p| p.aleatoric).collect();
        let nm = normal_composite(&w, &means, &vars, &cfg).unwrap();
        for k in 0..3 {
            assert!((ev.mean_color[k] - nm.mu[k]).abs() < 1e-12);
        }
        assert!((ev.aleatoric - nm.sigma2).abs() < 1e-3);
        let gt = [0.35, 0.2, 0.6];
        let e = total_loss(gt, &ev.nig(), 0.0).unwrap().nll;
        assert!((e - gaussian_nll(gt, &nm)).abs() < 1e-3, "{e}");
    }

    #[test]
    fn tape_losses_match_scalar() {
        let mut t = Tape::new();
        let target = t.constant(array![[0.1, 0.2, 0.3], [0.9, 0.5, 0.0]]);
        let mu = t.constant(array![[0.15, 0.1, 0.3], [0.6, 0.55, 0.2]]);
        let s2 = t.constant(array![[0.05], [1e-9]]);
        let nll = gaussian_nll_var(&mut t, target, mu, s2, 1e-6);
        let want0 = gaussian_nll(
            [0.1, 0.2, 0.3],
            &NormalPixel {
                mu: [0.15, 0.1, 0.3],
                sigma2: 0.05,
            },
        );
        let want1 = gaussian_nll(
            [0.9, 0.5, 0.0],
            &NormalPixel {
                mu: [0.6, 0.55, 0.2],
                sigma2: 1e-6,
            },
        );
        assert!((t.value(nll)[[0, 0]] - want0).abs() < 1e-12);
        assert!((t.value(nll)[[1, 0]] - want1).abs() < 1e-9 * want1.abs());
        let m = mse_var(&mut t, target, mu);
        let want = mse(&[[0.1, 0.2, 0.3]], &[[0.15, 0.1, 0.3]]);
        assert!((t.value(m)[[0, 0]] - want).abs() < 1e-15);
    }

    #[test]
    fn gaussian_nll_gradients() {
        let mut store = ParamStore::new();
        let mu = store.insert("mu", array![[0.2, 0.5, 0.7], [0.1, 0.1, 0.9]]);
        let s2 = store.insert("s2", array![[0.03], [0.2]]);
        let err = check_gradients(&mut store, 1e-6, |t, s| {
            let target = t.constant(array![[0.25, 0.4, 0.8], [0.0, 0.3, 0.6]]);
            let m = t.param(s, mu);
            let v = t.param(s, s2);
            let nll = gaussian_nll_var(t, target, m, v, 1e-6);
            t.sum_all(nll)
        })
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}

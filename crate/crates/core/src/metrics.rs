//! Image-quality and uncertainty-quality metrics.

use std::io::Write;

use serde::Serialize;

use crate::baselines::{gaussian_nll, NormalPixel};
use crate::evidential::{total_loss, EvidentialError, RgbNig};
use crate::image::Image;

/// PSNR written to CSV files in place of `+inf`.
pub const PSNR_CAP: f64 = 99.0;

fn check_dims(a: &Image, b: &Image) {
    assert!(
        a.width == b.width && a.height == b.height,
        "image sizes differ: {}x{} vs {}x{}",
        a.width,
        a.height,
        b.width,
        b.height
    );
}

pub fn image_mse(pred: &Image, gt: &Image) -> f64 {
    check_dims(pred, gt);
    crate::baselines::mse(&pred.pixels, &gt.pixels)
}

/// `10 log10(1 / MSE)`; `+inf` for identical images.
pub fn psnr(pred: &Image, gt: &Image) -> f64 {
    psnr_from_mse(image_mse(pred, gt))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Mean SSIM over all fully contained Gaussian windows of the channel-mean
/// luminance. Images smaller than the window use a window as large as the
/// smaller side.
pub fn ssim(pred: &Image, gt: &Image) -> f64 {
    check_dims(pred, gt);
    let (w, h) = (pred.width, pred.height);
    let size = SSIM_WINDOW.min(w).min(h);
    let g = gaussian_window(size);
    let (a, b) = (pred.luminance(), gt.luminance());
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - size {
        for x0 in 0..=w - size {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (dy, gy) in g.iter().enumerate() {
                for (dx, gx) in g.iter().enumerate() {
                    let k = gy * gx;
                    let (p, q) = (a.get(x0 + dx, y0 + dy), b.get(x0 + dx, y0 + dy));
                    ma += k * p;
                    mb += k * q;
                    saa += k * p * p;
                    sbb += k * q * q;
                    sab += k * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            count += 1;
        }
    }
    total / count as f64
}

/// Mean over pixels of the evidential NLL summed over channels.
pub fn nll_metric(gt: &Image, pixels: &[RgbNig]) -> Result<f64, EvidentialError> {
    assert_eq!(gt.len(), pixels.len());
    let mut s = 0.0;
    for (c, p) in gt.pixels.iter().zip(pixels) {
        s += total_loss(*c, p, 0.0)?.nll;
    }
    Ok(s / pixels.len() as f64)
}

/// Mean over pixels of the Gaussian NLL summed over channels.
pub fn gaussian_nll_metric(gt: &Image, pixels: &[NormalPixel]) -> f64 {
    assert_eq!(gt.len(), pixels.len());
    let s: f64 = gt.pixels.iter().zip(pixels).map(|(c, p)| gaussian_nll(*c, p)).sum();
    s / pixels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Rmse,
    Mae,
}

/// Per-pixel error over the three channels.
pub fn pixel_errors(pred: &[[f64; 3]], gt: &[[f64; 3]], kind: ErrorKind) -> Vec<f64> {
    assert_eq!(pred.len(), gt.len());
    pred.iter()
        .zip(gt)
        .map(|(p, g)| match kind {
            ErrorKind::Rmse => ((0..3).map(|k| (p[k] - g[k]).powi(2)).sum::<f64>() / 3.0).sqrt(),
            ErrorKind::Mae => (0..3).map(|k| (p[k] - g[k]).abs()).sum::<f64>() / 3.0,
        })
        .collect()
}

/// Error of a retained set: root mean square of the per-pixel errors for
/// RMSE, their mean for MAE.
fn set_error(errors: impl Iterator<Item = f64>, kind: ErrorKind) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for e in errors {
        s += match kind {
            ErrorKind::Rmse => e * e,
            ErrorKind::Mae => e,
        };
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    match kind {
        ErrorKind::Rmse => (s / n as f64).sqrt(),
        ErrorKind::Mae => s / n as f64,
    }
}

/// Removal fractions `0, 0.01, …, 0.99`.
pub fn default_fraction_grid() -> Vec<f64> {
    (0..100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsificationCurve {
    pub fractions: Vec<f64>,
    /// Error of the retained pixels after each removal step.
    pub errors: Vec<f64>,
    /// Whether `errors` were divided by the full-set error.
    pub normalized: bool,
}

/// Indices ordered for removal: descending `score`, ties by ascending index.
fn removal_order(score: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx
}

/// Retained-set error after removing the `floor(f·n)` highest-scored pixels
/// for each fraction `f`, divided by the full-set error when `normalize`.
pub fn sparsification_curve(
    score: &[f64],
    errors: &[f64],
    kind: ErrorKind,
    grid: &[f64],
    normalize: bool,
) -> SparsificationCurve {
    assert_eq!(score.len(), errors.len());
    assert!(grid.iter().all(|f| (0.0..1.0).contains(f)), "fractions must lie in [0, 1)");
    let order = removal_order(score);
    let n = errors.len();
    let full = set_error(errors.iter().copied(), kind);
    let vals = grid
        .iter()
        .map(|f| {
            let k = (f * n as f64).floor() as usize;
            let e = set_error(order[k..].iter().map(|&i| errors[i]), kind);
            if normalize {
                if full > 0.0 {
                    e / full
                } else {
                    0.0
                }
            } else {
                e
            }
        })
        .collect();
    SparsificationCurve {
        fractions: grid.to_vec(),
        errors: vals,
        normalized: normalize,
    }
}

/// Trapezoid integral of `max(0, a - b)` over the shared fraction grid.
pub fn area_between(a: &SparsificationCurve, b: &SparsificationCurve) -> f64 {
    assert_eq!(a.fractions, b.fractions);
    let gap: Vec<f64> = a.errors.iter().zip(&b.errors).map(|(x, y)| (x - y).max(0.0)).collect();
    a.fractions
        .windows(2)
        .zip(gap.windows(2))
        .map(|(f, g)| 0.5 * (f[1] - f[0]) * (g[0] + g[1]))
        .sum()
}

/// Area under the sparsification error: gap between the curve obtained by
/// removing pixels in order of decreasing uncertainty and the oracle curve
/// that removes them in order of decreasing error. Equal uncertainties are
/// removed in index order.
pub fn ause(uncertainty: &[f64], errors: &[f64], kind: ErrorKind, grid: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let by_unc = sparsification_curve(uncertainty, errors, kind, grid, true);
    let oracle = sparsification_curve(errors, errors, kind, grid, true);
    area_between(&by_unc, &oracle)
}

/// Slow reference for [`ause`]: each pixel's removal rank is found by
/// counting the pixels that outrank it, and every curve point rescans the
/// whole set. Quadratic per grid point; meant for small cross-checks.
pub fn ause_reference(uncertainty: &[f64], errors: &[f64], kind: ErrorKind, grid: &[f64]) -> f64 {
    let (unc, err) = (uncertainty, errors);
    let n = unc.len();
    if n == 0 {
        return 0.0;
    }
    let rank = |score: &[f64], i: usize| {
        (0..n)
            .filter(|&j| score[j] > score[i] || (score[j] == score[i] && j < i))
            .count()
    };
    let full = set_error(err.iter().copied(), kind);
    let curve = |score: &[f64]| -> Vec<f64> {
        grid.iter()
            .map(|f| {
                let k = (f * n as f64).floor() as usize;
                let kept = (0..n).filter(|&i| rank(score, i) >= k).map(|i| err[i]);
                if full > 0.0 {
                    set_error(kept, kind) / full
                } else {
                    0.0
                }
            })
            .collect()
    };
    let (u, o) = (curve(unc), curve(err));
    let mut area = 0.0;
    for i in 1..grid.len() {
        let g0 = (u[i - 1] - o[i - 1]).max(0.0);
        let g1 = (u[i] - o[i]).max(0.0);
        area += 0.5 * (grid[i] - grid[i - 1]) * (g0 + g1);
    }
    area
}

/// All orderings of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scene: String,
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
    /// Empty for methods without a predictive distribution.
    pub nll: Option<f64>,
    pub ause_rmse: Option<f64>,
    pub ause_mae: Option<f64>,
}

/// Writes `scene,method,psnr,ssim,nll,ause_rmse,ause_mae` with a header.
/// Infinite PSNR is written as [`PSNR_CAP`].
pub fn write_metrics_csv(out: impl Write, rows: &[MetricsRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in rows {
        let mut r = r.clone();
        r.psnr = r.psnr.min(PSNR_CAP);
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

//! Self-check suites that compare closed forms and analytic gradients with
//! independent numerical routes. Each suite returns a report instead of
//! panicking so it can be run from the command line.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::check_gradients;
use crate::evidential::oracle::{
    mc_oracle_moments, quadrature_marginal_density, random_point_prior, student_t_logpdf, HierarchySpec,
    PointPrior,
};
use crate::evidential::{nig_moments, nig_to_student_t, nll_loss, NigParams};
use crate::field::{FieldConfig, FieldParams, PointPrediction};
use crate::math;
use crate::metrics::{ause, ause_reference, default_fraction_grid, permutations, ErrorKind};
use crate::render::{composite, compute_weights, depths_for, Ray, RenderConfig, Sampling};
use crate::train::{record_loss, Objective, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the suite's figure of merit.
    pub worst: f64,
    /// Pass threshold for `worst`.
    pub limit: f64,
    pub detail: String,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (limit {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit,
            self.detail
        )
    }
}

fn report(name: &'static str, worst: f64, limit: f64, detail: String) -> SuiteReport {
    SuiteReport {
        name,
        passed: worst < limit,
        worst,
        limit,
        detail,
    }
}

/// Reverse-mode gradients of the full evidential objective, through the
/// renderer, on a two-layer field and four random rays, against central
/// differences. Figure of merit: max relative error.
pub fn gradient_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = FieldConfig {
        width: 16,
        depth: 2,
        ..FieldConfig::default()
    };
    let mut params = FieldParams::init(field, &mut rng);
    let arch = params.clone();
    let render = RenderConfig {
        samples: 16,
        ..RenderConfig::default()
    };
    let rays: Vec<Ray> = (0..4)
        .map(|_| {
            let o = math::scale(random_unit(&mut rng), 3.0);
            let aim = [0, 1, 2].map(|_| rng.random_range(-0.3..0.3));
            Ray::new(o, math::normalize(math::sub(aim, o)), 1.5, 4.5).expect("valid ray")
        })
        .collect();
    let depths: Vec<Vec<f64>> = rays
        .iter()
        .enumerate()
        .map(|(i, r)| depths_for(r, render.samples, Sampling::Stratified(seed), i).expect("valid ray"))
        .collect();
    let targets: Vec<[f64; 3]> = (0..4).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let cfg = TrainConfig {
        objective: Objective::Evidential,
        ..TrainConfig::default()
    };
    let n_params: usize = params.store.ids().map(|id| params.store.value(id).len()).sum();
    let result = check_gradients(&mut params.store, 1e-4, |t, s| {
        record_loss(t, &arch, s, &rays, &depths, &targets, &render, &cfg).0
    });
    match result {
        Ok(err) => report("gradients", err, 1e-4, format!("({n_params} parameters)")),
        Err(e) => report("gradients", f64::INFINITY, 1e-4, e.to_string()),
    }
}

fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0));
        let n = math::dot(v, v);
        if n > 1e-4 && n <= 1.0 {
            return math::normalize(v);
        }
    }
}

/// Pixel mean, total, aleatoric and epistemic variance from the renderer's
/// compositing rule against a hierarchical Monte-Carlo estimate on random
/// rays. Figure of merit: largest |z-score|. The decomposition
/// `total = aleatoric + epistemic` is also checked to 1e-12 relative.
pub fn propagation_suite(seed: u64, rays: usize, samples: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = RenderConfig {
        background: [0.0; 3],
        ..RenderConfig::default()
    };
    let (mut worst_z, mut worst_split) = (0.0f64, 0.0f64);
    for r in 0..rays {
        let rho: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..3.0)).collect();
        let delta: Vec<f64> = (0..8).map(|_| rng.random_range(0.05..0.4)).collect();
        let w = compute_weights(&rho, &delta).expect("matching lengths");
        let priors: Vec<PointPrior> = (0..8).map(|_| random_point_prior(&mut rng)).collect();
        let points: Vec<PointPrediction> = priors
            .iter()
            .zip(&rho)
            .map(|(p, &density)| {
                let PointPrior::Nig(n) = p else { unreachable!() };
                let m = nig_moments(n).expect("valid prior");
                PointPrediction {
                    mean_color: [m.mean; 3],
                    aleatoric: m.aleatoric,
                    epistemic: m.epistemic,
                    shape_score: 1.0,
                    density,
                }
            })
            .collect();
        let px = composite(&w, &points, &cfg).expect("valid pixel");
        worst_split = worst_split.max((px.total - (px.aleatoric + px.epistemic)).abs() / px.total);
        let est = match mc_oracle_moments(&HierarchySpec { weights: w, priors }, samples, seed.wrapping_add(r as u64)) {
            Ok(e) => e,
            Err(e) => return report("propagation", f64::INFINITY, 3.0, e.to_string()),
        };
        for z in [
            est.mean.z_score(px.mean_color[0]),
            est.total.z_score(px.total),
            est.aleatoric.z_score(px.aleatoric),
            est.epistemic.z_score(px.epistemic),
        ] {
            worst_z = worst_z.max(z);
        }
    }
    let mut r = report(
        "propagation",
        worst_z,
        3.0,
        format!("({rays} rays x {samples} samples; split error {worst_split:.1e})"),
    );
    r.passed &= worst_split <= 1e-12;
    r
}

/// Closed-form Student-t marginal and NLL against two-dimensional quadrature
/// of the Normal x Normal-Inverse-Gamma hierarchy, at 20 points for each of
/// `sets` random parameter sets. Figure of merit: largest density error
/// (limit 1e-5); the NLL must also match `-ln(density)` to 1e-6.
pub fn marginal_suite(seed: u64, sets: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_pdf, mut worst_nll) = (0.0f64, 0.0f64);
    for _ in 0..sets {
        let p = NigParams::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.1..10.0),
            rng.random_range(1.1..10.0),
            rng.random_range(0.01..1.0),
        )
        .expect("valid parameters");
        let t = nig_to_student_t(&p).expect("valid parameters");
        let scale = t.scale2.sqrt();
        for k in 0..20 {
            let c = p.gamma + scale * (-4.0 + 8.0 * k as f64 / 19.0);
            let quad = quadrature_marginal_density(c, &p);
            let closed = student_t_logpdf(c, &t).exp();
            worst_pdf = worst_pdf.max((closed - quad).abs());
            let nll = nll_loss(c, &p).expect("valid parameters");
            worst_nll = worst_nll.max((nll + quad.ln()).abs());
        }
    }
    let mut r = report(
        "marginal",
        worst_pdf,
        1e-5,
        format!("({sets} sets x 20 points; nll error {worst_nll:.1e})"),
    );
    r.passed &= worst_nll < 1e-6;
    r
}

/// With `α = ν = 1e6` and `β = σ²(α−1)` the evidential NLL approaches the
/// Gaussian NLL. Figure of merit: largest absolute gap over 100 draws.
pub fn gaussian_limit_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = rng.random_range(0.0..1.0);
        let gamma = rng.random_range(0.0..1.0);
        let s2 = rng.random_range(0.01..0.5);
        let a = 1e6;
        let p = NigParams::new(gamma, a, a, s2 * (a - 1.0)).expect("valid parameters");
        let gauss = 0.5 * (2.0 * std::f64::consts::PI * s2).ln() + (c - gamma).powi(2) / (2.0 * s2);
        worst = worst.max((nll_loss(c, &p).expect("valid parameters") - gauss).abs());
    }
    report("gaussian-limit", worst, 1e-3, "(100 draws)".into())
}

/// AUSE against the rank-counting reference on every ordering of a
/// six-pixel instance, plus the oracle ranking, which must score exactly 0.
pub fn ause_suite() -> SuiteReport {
    let err = [0.05, 0.4, 0.12, 0.33, 0.01, 0.27];
    let grid = default_fraction_grid();
    let mut worst = 0.0f64;
    let mut oracle_zero = true;
    for kind in [ErrorKind::Rmse, ErrorKind::Mae] {
        for p in permutations(err.len()) {
            let unc: Vec<f64> = p.iter().map(|&r| r as f64).collect();
            worst = worst.max((ause(&unc, &err, kind, &grid) - ause_reference(&unc, &err, kind, &grid)).abs());
        }
        oracle_zero &= ause(&err, &err, kind, &grid) == 0.0;
    }
    let mut r = report(
        "ause",
        worst,
        1e-12,
        format!("(720 orderings x 2 error kinds; oracle ranking zero: {oracle_zero})"),
    );
    r.passed &= oracle_zero;
    r
}

/// Every suite at its full size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        gradient_suite(seed),
        propagation_suite(seed, 20, 1_000_000),
        marginal_suite(seed, 10),
        gaussian_limit_suite(seed),
        ause_suite(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for r in [
            gaussian_limit_suite(1),
            ause_suite(),
            marginal_suite(1, 1),
            propagation_suite(1, 1, 200_000),
        ] {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn report_line_format() {
        let r = report("x", 2.0, 1.0, "(d)".into());
        assert!(!r.passed);
        assert_eq!(r.to_string(), "FAIL x: worst 2.000e0 (limit 1.0e0) (d)");
    }
}

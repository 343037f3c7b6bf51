//! Independent numerical routes for the closed forms in the parent module.
//!
//! Nothing here calls into the closed-form code: the Student-t density uses
//! `statrs` for `ln Γ`, the marginal density is integrated numerically from
//! the three hierarchical densities, and pixel moments are estimated by
//! sampling the hierarchy directly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::{EvidentialError, NigParams, StudentTParams};

/// Log density of a location-scale Student-t.
pub fn student_t_logpdf(x: f64, t: &StudentTParams) -> f64 {
    let v = t.dof;
    let z2 = (x - t.loc).powi(2) / (v * t.scale2);
    ln_gamma((v + 1.0) / 2.0) - ln_gamma(v / 2.0) - 0.5 * (PI * v * t.scale2).ln()
        - (v + 1.0) / 2.0 * z2.ln_1p()
}

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} f(x) dx`, by Newton
/// iteration on orthonormal Hermite polynomials.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Marginal density `p(c) = ∫∫ N(c; μ, σ²) N(μ; γ, σ²/ν) Γ⁻¹(σ²; α, β) dμ dσ²`.
///
/// The inner integral over `μ` uses Gauss–Hermite; the outer integral over
/// `σ² ∈ (0, σ²_max)` is adaptive Simpson in `ln σ²`, with `σ²_max` set so
/// the inverse-gamma tail beyond it carries less than `1e-10` mass.
pub fn quadrature_marginal_density(c: f64, p: &NigParams) -> f64 {
    let (nodes, weights) = gauss_hermite(96);
    let (alpha, beta, nu, gamma) = (p.alpha, p.beta, p.nu, p.gamma);
    let log_ig_norm = alpha * beta.ln() - ln_gamma(alpha);

    // upper limit: P(σ² > s) = P(G < β/s) for G ~ Gamma(α, 1)
    let mut s_max = beta / alpha;
    while gamma_lr(alpha, beta / s_max) >= 1e-10 {
        s_max *= 2.0;
    }
    let s_min = beta / 800.0;

    let integrand = |u: f64| {
        let s = u.exp();
        let ig = (log_ig_norm - (alpha + 1.0) * s.ln() - beta / s).exp();
        let spread = (2.0 * s / nu).sqrt();
        let mut inner = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let mu = gamma + spread * x;
            inner += w * (-(c - mu).powi(2) / (2.0 * s)).exp() / (2.0 * PI * s).sqrt();
        }
        inner /= PI.sqrt();
        inner * ig * s
    };
    adaptive_simpson(&integrand, s_min.ln(), s_max.ln(), 1e-13)
}

/// Per-point distribution `π_i` over `(μ_i, σ_i²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointPrior {
    Nig(NigParams),
    /// Degenerate prior concentrated at fixed values.
    Dirac { mu: f64, sigma2: f64 },
}

impl PointPrior {
    pub fn mean(&self) -> f64 {
        match self {
            PointPrior::Nig(p) => p.gamma,
            PointPrior::Dirac { mu, .. } => *mu,
        }
    }
}

/// Points along one ray: fixed rendering weights and per-point priors.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    pub weights: Vec<f64>,
    pub priors: Vec<PointPrior>,
}

impl HierarchySpec {
    pub fn single(prior: PointPrior) -> Self {
        Self {
            weights: vec![1.0],
            priors: vec![prior],
        }
    }
}

/// Streaming central moments up to order four, mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, o: &MomentAccumulator) {
        if o.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n, o.n);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let d3 = d2 * d;
        let d4 = d2 * d2;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3 + o.m3 + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        *self = Self {
            n,
            mean,
            m2,
            m3,
            m4,
        };
    }

    pub fn count(&self) -> f64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        self.m2 / self.n
    }

    pub fn mean_se(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }

    /// Large-sample standard error of the variance estimate.
    pub fn variance_se(&self) -> f64 {
        let s2 = self.variance();
        let m4 = self.m4 / self.n;
        ((m4 - s2 * s2).max(0.0) / self.n).sqrt()
    }
}

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value − x|` in units of the standard error.
    pub fn z_score(&self, x: f64) -> f64 {
        let d = (self.value - x).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: Estimate,
    pub total: Estimate,
    pub aleatoric: Estimate,
    pub epistemic: Estimate,
    pub samples: usize,
}

const CHUNK: usize = 1 << 15;

fn sample_chunk(
    spec: &HierarchySpec,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> [MomentAccumulator; 3] {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gammas: Vec<Option<Gamma<f64>>> = spec
        .priors
        .iter()
        .map(|p| match p {
            PointPrior::Nig(n) => Some(Gamma::new(n.alpha, 1.0 / n.beta).expect("valid gamma")),
            PointPrior::Dirac { .. } => None,
        })
        .collect();
    let mut color = MomentAccumulator::default();
    let mut cond_var = MomentAccumulator::default();
    let mut cond_mean = MomentAccumulator::default();
    for _ in 0..count {
        let mut mean = 0.0;
        let mut var = 0.0;
        for ((w, prior), g) in spec.weights.iter().zip(&spec.priors).zip(&gammas) {
            let (mu, s2) = match (prior, g) {
                (PointPrior::Nig(p), Some(g)) => {
                    // σ² ~ Γ⁻¹(α, β)  ⇔  1/σ² ~ Gamma(shape α, scale 1/β)
                    let s2 = 1.0 / g.sample(rng);
                    let mu = p.gamma + (s2 / p.nu).sqrt() * std_normal.sample(rng);
                    (mu, s2)
                }
                (PointPrior::Dirac { mu, sigma2 }, _) => (*mu, *sigma2),
                _ => unreachable!(),
            };
            mean += w * mu;
            var += w * w * s2;
        }
        let c = mean + var.sqrt() * std_normal.sample(rng);
        color.push(c);
        cond_var.push(var);
        cond_mean.push(mean);
    }
    [color, cond_var, cond_mean]
}

/// Hierarchical Monte-Carlo estimate of the pixel mean and of
/// `U = Var[c]`, `U^alea = E[Var[c|θ]]`, `U^epis = Var[E[c|θ]]`.
///
/// Draws `(μ_i, σ_i²) ~ π_i` independently per point, then
/// `c ~ N(Σ w_i μ_i, Σ w_i² σ_i²)`. Samples are generated in fixed-size
/// chunks on independent ChaCha streams derived from `seed` and merged in
/// chunk order, so the result does not depend on thread count.
pub fn mc_oracle_moments(
    spec: &HierarchySpec,
    samples: usize,
    seed: u64,
) -> Result<MomentEstimate, EvidentialError> {
    if samples < 10_000 {
        return Err(EvidentialError::TooFewSamples(samples));
    }
    if spec.weights.is_empty()
        || spec.weights.len() != spec.priors.len()
        || spec.weights.iter().all(|w| *w == 0.0)
    {
        return Err(EvidentialError::DegenerateVariance);
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<[MomentAccumulator; 3]> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = CHUNK.min(samples - k * CHUNK);
            sample_chunk(spec, count, &mut rng)
        })
        .collect();
    let mut acc = [MomentAccumulator::default(); 3];
    for part in &parts {
        for (a, p) in acc.iter_mut().zip(part) {
            a.merge(p);
        }
    }
    let [color, cond_var, cond_mean] = acc;
    if color.variance() <= 0.0 || !color.variance().is_finite() {
        return Err(EvidentialError::DegenerateVariance);
    }
    Ok(MomentEstimate {
        mean: Estimate {
            value: color.mean(),
            se: color.mean_se(),
        },
        total: Estimate {
            value: color.variance(),
            se: color.variance_se(),
        },
        aleatoric: Estimate {
            value: cond_var.mean(),
            se: cond_var.mean_se(),
        },
        epistemic: Estimate {
            value: cond_mean.variance(),
            se: cond_mean.variance_se(),
        },
        samples,
    })
}

/// Random NIG prior with finite fourth moments (`α > 4`), for oracle runs.
pub fn random_point_prior(rng: &mut impl Rng) -> PointPrior {
    PointPrior::Nig(NigParams {
        gamma: rng.random_range(0.0..1.0),
        nu: rng.random_range(0.2..5.0),
        alpha: rng.random_range(4.5..9.0),
        beta: rng.random_range(0.01..0.3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::{nig_moments, nll_loss};

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(40);
        let s0: f64 = w.iter().sum();
        let s2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((s0 - PI.sqrt()).abs() < 1e-13);
        assert!((s2 - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sqrt()).collect();
        let mut whole = MomentAccumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = MomentAccumulator::default();
        let mut b = MomentAccumulator::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.m2 - whole.m2).abs() < 1e-9 * whole.m2);
        assert!((a.m4 - whole.m4).abs() < 1e-9 * whole.m4);
    }

    #[test]
    fn quadrature_density_at_mode_matches_reference_nll() {
        let p = NigParams::new(0.5, 1.0, 2.0, 1.0).unwrap();
        let d = quadrature_marginal_density(0.5, &p);
        assert!((-d.ln() - 0.980_829).abs() < 1e-5, "{}", -d.ln());
        assert!((-d.ln() - nll_loss(0.5, &p).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn dirac_priors_have_zero_epistemic() {
        let spec = HierarchySpec {
            weights: vec![0.5, 0.3],
            priors: vec![
                PointPrior::Dirac { mu: 0.2, sigma2: 0.01 },
                PointPrior::Dirac { mu: 0.7, sigma2: 0.04 },
            ],
        };
        let est = mc_oracle_moments(&spec, 20_000, 3).unwrap();
        assert_eq!(est.epistemic.value, 0.0);
        assert!((est.aleatoric.value - (0.25 * 0.01 + 0.09 * 0.04)).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        let spec = HierarchySpec::single(PointPrior::Dirac { mu: 0.0, sigma2: 1.0 });
        assert_eq!(
            mc_oracle_moments(&spec, 100, 0),
            Err(EvidentialError::TooFewSamples(100))
        );
    }

    #[test]
    fn single_point_nig_moments() {
        let p = NigParams::new(0.5, 1.0, 2.0, 1.0).unwrap();
        let est = mc_oracle_moments(&HierarchySpec::single(PointPrior::Nig(p)), 1_000_000, 17)
            .unwrap();
        let m = nig_moments(&p).unwrap();
        // α = 2 has no finite fourth moment, so the reported SE is itself
        // noisy; the point estimates must still land near the closed form
        assert!(est.mean.z_score(m.mean) < 3.0);
        assert!((est.aleatoric.value - m.aleatoric).abs() < 0.1);
        assert!((est.epistemic.value - m.epistemic).abs() < 0.1);
        assert!(
            (est.total.value - est.aleatoric.value - est.epistemic.value).abs()
                < 3.0 * (est.total.se + est.aleatoric.se + est.epistemic.se)
        );
    }
}

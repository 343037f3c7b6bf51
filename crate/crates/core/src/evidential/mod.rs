//! Normal-inverse-gamma closed forms, the Student-t marginal, and the
//! evidential training loss.
//!
//! A pixel color `c` is modeled hierarchically as
//! `c | μ, σ² ~ N(μ, σ²)`, `μ | σ² ~ N(γ, σ²/ν)`, `σ² ~ Γ⁻¹(α, β)`.
//! Integrating out `(μ, σ²)` gives a Student-t with location `γ`,
//! squared scale `β(ν+1)/(αν)` and `2α` degrees of freedom, whose negative
//! log density is the NLL term of the loss. The [`oracle`] submodule holds
//! two independent numerical routes (hierarchical sampling and quadrature)
//! used to check these closed forms.

pub mod oracle;

use std::f64::consts::PI;

use thiserror::Error;

use crate::autodiff::special::lgamma_unchecked;
use crate::autodiff::{Tape, Var};

#[derive(Debug, Error, PartialEq)]
pub enum EvidentialError {
    #[error("invalid NIG parameters (gamma={gamma}, nu={nu}, alpha={alpha}, beta={beta})")]
    InvalidNig {
        gamma: f64,
        nu: f64,
        alpha: f64,
        beta: f64,
    },
    #[error("non-finite NLL for c={c} at (gamma={gamma}, nu={nu}, alpha={alpha}, beta={beta})")]
    NonFiniteNll {
        c: f64,
        gamma: f64,
        nu: f64,
        alpha: f64,
        beta: f64,
    },
    #[error("negative regularization coefficient {0}")]
    NegativeLambda(f64),
    #[error("Monte-Carlo sample count {0} below 10^4")]
    TooFewSamples(usize),
    #[error("hierarchy has degenerate variance")]
    DegenerateVariance,
}

/// Parameters of NIG(γ, ν, α, β).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigParams {
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(gamma: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self, EvidentialError> {
        let p = Self {
            gamma,
            nu,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EvidentialError> {
        let ok = self.gamma.is_finite()
            && self.nu.is_finite()
            && self.alpha.is_finite()
            && self.beta.is_finite()
            && self.nu > 0.0
            && self.alpha > 1.0
            && self.beta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(EvidentialError::InvalidNig {
                gamma: self.gamma,
                nu: self.nu,
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    /// `Ω = 2β(ν + 1)`.
    pub fn omega(&self) -> f64 {
        2.0 * self.beta * (self.nu + 1.0)
    }
}

/// Student-t with location, squared scale and degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTParams {
    pub loc: f64,
    pub scale2: f64,
    pub dof: f64,
}

/// Predictive mean and the variance decomposition `U = U^alea + U^epis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
}

pub fn nig_moments(p: &NigParams) -> Result<Moments, EvidentialError> {
    p.validate()?;
    let aleatoric = p.beta / (p.alpha - 1.0);
    let epistemic = aleatoric / p.nu;
    Ok(Moments {
        mean: p.gamma,
        total: aleatoric + epistemic,
        aleatoric,
        epistemic,
    })
}

pub fn nig_to_student_t(p: &NigParams) -> Result<StudentTParams, EvidentialError> {
    p.validate()?;
    Ok(StudentTParams {
        loc: p.gamma,
        scale2: p.beta * (p.nu + 1.0) / (p.alpha * p.nu),
        dof: 2.0 * p.alpha,
    })
}

/// Negative log marginal likelihood of `c_gt` under NIG(γ, ν, α, β).
pub fn nll_loss(c_gt: f64, p: &NigParams) -> Result<f64, EvidentialError> {
    p.validate()?;
    let omega = p.omega();
    let a = p.alpha;
    let r = c_gt - p.gamma;
    let nll = 0.5 * (PI / p.nu).ln() - a * omega.ln() + lgamma_unchecked(a)
        - lgamma_unchecked(a + 0.5)
        + (a + 0.5) * (r * r * p.nu + omega).ln();
    if nll.is_finite() {
        Ok(nll)
    } else {
        Err(EvidentialError::NonFiniteNll {
            c: c_gt,
            gamma: p.gamma,
            nu: p.nu,
            alpha: p.alpha,
            beta: p.beta,
        })
    }
}

/// Evidence regularizer `|err| (2ν + α)` for a precomputed absolute error.
pub fn reg_loss(abs_err: f64, nu: f64, alpha: f64) -> f64 {
    abs_err.abs() * (2.0 * nu + alpha)
}

/// Per-pixel RGB NIG: channel means with shared `(ν, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgbNig {
    pub gamma: [f64; 3],
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl RgbNig {
    pub fn channel(&self, k: usize) -> NigParams {
        NigParams {
            gamma: self.gamma[k],
            nu: self.nu,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub nll: f64,
    pub reg: f64,
    pub total: f64,
    pub lambda_reg: f64,
    pub omega: f64,
}

/// Loss of one RGB pixel: NLL summed over channels, regularizer on the
/// channel-mean absolute error.
pub fn total_loss(c_gt: [f64; 3], p: &RgbNig, lambda_reg: f64) -> Result<LossTerms, EvidentialError> {
    if !(lambda_reg >= 0.0) {
        return Err(EvidentialError::NegativeLambda(lambda_reg));
    }
    let mut nll = 0.0;
    let mut abs_err = 0.0;
    for k in 0..3 {
        nll += nll_loss(c_gt[k], &p.channel(k))?;
        abs_err += (c_gt[k] - p.gamma[k]).abs();
    }
    let reg = reg_loss(abs_err / 3.0, p.nu, p.alpha);
    Ok(LossTerms {
        nll,
        reg,
        total: nll + lambda_reg * reg,
        lambda_reg,
        omega: p.channel(0).omega(),
    })
}

/// Column-vector NIG quantities on a tape (each `R×1`, gamma `R×3`).
#[derive(Debug, Clone, Copy)]
pub struct NigVars {
    pub gamma: Var,
    pub nu: Var,
    pub alpha: Var,
    pub beta: Var,
}

/// Per-row NLL summed over the columns of `target`/`gamma` (`R×C`), with
/// `nu`, `alpha`, `beta` shared across columns. Returns `R×1`.
pub fn nll_loss_var(tape: &mut Tape, target: Var, p: &NigVars) -> Var {
    let channels = tape.shape(target).1;
    // Ω = 2β(1+ν)
    let nu1 = tape.offset(p.nu, 1.0);
    let omega = tape.mul(p.beta, nu1);
    let omega = tape.scale(omega, 2.0);
    let ln_omega = tape.ln(omega);

    // ½ ln π − ½ ln ν − α ln Ω + lnΓ(α) − lnΓ(α+½)   (shared part)
    let ln_nu = tape.ln(p.nu);
    let half_ln = tape.scale(ln_nu, -0.5);
    let a_ln_omega = tape.mul(p.alpha, ln_omega);
    let lg_a = tape.lgamma(p.alpha);
    let a_half = tape.offset(p.alpha, 0.5);
    let lg_ah = tape.lgamma(a_half);
    let shared = tape.sub(half_ln, a_ln_omega);
    let shared = tape.add(shared, lg_a);
    let shared = tape.sub(shared, lg_ah);
    let shared = tape.offset(shared, 0.5 * PI.ln());
    let shared = tape.scale(shared, channels as f64);

    // Σ_k (α+½) ln((c_k−γ_k)²ν + Ω)
    let diff = tape.sub(target, p.gamma);
    let sq = tape.square(diff);
    let sq_nu = tape.mul_col(sq, p.nu);
    let ones_row = ndarray::Array2::ones((1, channels));
    let ones_row = tape.constant(ones_row);
    let omega_b = tape.matmul(omega, ones_row);
    let inner = tape.add(sq_nu, omega_b);
    let ln_inner = tape.ln(inner);
    let weighted = tape.mul_col(ln_inner, a_half);
    let per_channel = tape.row_sum(weighted);
    tape.add(shared, per_channel)
}

/// Per-row regularizer `mean_k |c_k − γ_k| · (2ν + α)`. Returns `R×1`.
pub fn reg_loss_var(tape: &mut Tape, target: Var, p: &NigVars) -> Var {
    let channels = tape.shape(target).1 as f64;
    let diff = tape.sub(target, p.gamma);
    let abs = tape.abs(diff);
    let mae = tape.row_sum(abs);
    let mae = tape.scale(mae, 1.0 / channels);
    let two_nu = tape.scale(p.nu, 2.0);
    let evidence = tape.add(two_nu, p.alpha);
    tape.mul(mae, evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_gradients, ParamStore};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_nig(rng: &mut impl Rng) -> NigParams {
        NigParams::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.05..20.0),
            rng.random_range(1.01..20.0),
            rng.random_range(1e-3..2.0),
        )
        .unwrap()
    }

    #[test]
    fn moments_substitution() {
        let m = nig_moments(&NigParams::new(0.5, 1.0, 2.0, 1.0).unwrap()).unwrap();
        assert_eq!((m.mean, m.aleatoric, m.epistemic, m.total), (0.5, 1.0, 1.0, 2.0));
        let m = nig_moments(&NigParams::new(0.5, 1e12, 2.0, 1.0).unwrap()).unwrap();
        assert!(m.epistemic <= 1e-12);
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(NigParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        let raw = NigParams {
            gamma: 0.0,
            nu: 1.0,
            alpha: 0.9,
            beta: 1.0,
        };
        assert!(nig_moments(&raw).is_err());
        assert!(nll_loss(0.0, &raw).is_err());
    }

    #[test]
    fn student_t_substitution_and_limit() {
        let t = nig_to_student_t(&NigParams::new(0.5, 1.0, 2.0, 1.0).unwrap()).unwrap();
        assert_eq!((t.loc, t.scale2, t.dof), (0.5, 1.0, 4.0));
        let t = nig_to_student_t(&NigParams::new(0.0, 1e12, 3.0, 0.6).unwrap()).unwrap();
        assert!((t.scale2 - 0.2).abs() < 1e-11);
    }

    #[test]
    fn nll_reference_value() {
        // −ln of the quadrature marginal density at c = γ (see oracle tests)
        let v = nll_loss(0.5, &NigParams::new(0.5, 1.0, 2.0, 1.0).unwrap()).unwrap();
        assert!((v - 0.980_829).abs() < 1e-5, "{v}");
    }

    #[test]
    fn nll_equals_negative_student_t_logpdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = random_nig(&mut rng);
            let c = rng.random_range(-0.5..1.5);
            let t = nig_to_student_t(&p).unwrap();
            let want = -oracle::student_t_logpdf(c, &t);
            let got = nll_loss(c, &p).unwrap();
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn nll_minimized_at_gamma_and_monotone() {
        let p = NigParams::new(0.4, 2.0, 3.0, 0.5).unwrap();
        let at = nll_loss(0.4, &p).unwrap();
        let mut prev = at;
        for k in 1..50 {
            let d = k as f64 * 0.02;
            let up = nll_loss(0.4 + d, &p).unwrap();
            let down = nll_loss(0.4 - d, &p).unwrap();
            assert!(up > prev && (up - down).abs() < 1e-12);
            prev = up;
        }
    }

    #[test]
    fn gaussian_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let c = rng.random_range(0.0..1.0);
            let gamma = rng.random_range(0.0..1.0);
            let s2 = rng.random_range(0.01..0.5);
            let a = 1e6;
            let p = NigParams::new(gamma, a, a, s2 * (a - 1.0)).unwrap();
            let gauss = 0.5 * (2.0 * PI * s2).ln() + (c - gamma).powi(2) / (2.0 * s2);
            assert!((nll_loss(c, &p).unwrap() - gauss).abs() < 1e-3);
        }
    }

    #[test]
    fn reg_examples() {
        assert_eq!(reg_loss(0.0, 3.0, 2.0), 0.0);
        assert!((reg_loss(0.2, 2.0, 3.0) - 1.4).abs() < 1e-12);
        let base = reg_loss(0.3, 1.5, 2.0);
        let doubled = reg_loss(0.3, 3.0, 2.0);
        assert!((doubled - base - 2.0 * 1.5 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn total_loss_examples() {
        let p = RgbNig {
            gamma: [0.3, 0.3, 0.3],
            nu: 1.5,
            alpha: 2.5,
            beta: 0.02,
        };
        let c = [0.35, 0.35, 0.35];
        let t0 = total_loss(c, &p, 0.0).unwrap();
        assert_eq!(t0.total, t0.nll);
        let scalar = nll_loss(0.35, &p.channel(0)).unwrap();
        assert!((t0.nll - 3.0 * scalar).abs() < 1e-12);
        let t1 = total_loss(c, &p, 0.5).unwrap();
        assert!((t1.total - (t1.nll + 0.5 * t1.reg)).abs() <= 1e-12 * t1.total.abs());
        assert!(total_loss(c, &p, -1.0).is_err());
    }

    #[test]
    fn tape_losses_match_scalar_and_gradcheck() {
        let mut store = ParamStore::new();
        let g = store.insert("gamma", array![[0.2, 0.5, 0.9], [0.6, 0.1, 0.4]]);
        let nu = store.insert("nu", array![[0.7], [3.0]]);
        let al = store.insert("alpha", array![[1.8], [4.2]]);
        let be = store.insert("beta", array![[0.05], [0.3]]);
        let target: Array2<f64> = array![[0.25, 0.45, 0.8], [0.3, 0.2, 0.5]];
        let build = |t: &mut Tape, s: &ParamStore| {
            let vars = NigVars {
                gamma: t.param(s, g),
                nu: t.param(s, nu),
                alpha: t.param(s, al),
                beta: t.param(s, be),
            };
            let c = t.constant(target.clone());
            let nll = nll_loss_var(t, c, &vars);
            let reg = reg_loss_var(t, c, &vars);
            let reg = t.scale(reg, 0.1);
            let tot = t.add(nll, reg);
            t.sum_all(tot)
        };
        let mut tape = Tape::new();
        let root = build(&mut tape, &store);
        let mut want = 0.0;
        for r in 0..2 {
            let p = RgbNig {
                gamma: [store.value(g)[[r, 0]], store.value(g)[[r, 1]], store.value(g)[[r, 2]]],
                nu: store.value(nu)[[r, 0]],
                alpha: store.value(al)[[r, 0]],
                beta: store.value(be)[[r, 0]],
            };
            let c = [target[[r, 0]], target[[r, 1]], target[[r, 2]]];
            want += total_loss(c, &p, 0.1).unwrap().total;
        }
        assert!((tape.scalar_value(root) - want).abs() < 1e-12);
        let err = check_gradients(&mut store, 1e-6, build).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}

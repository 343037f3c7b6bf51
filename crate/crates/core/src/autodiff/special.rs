//! Scalar special functions used by the evidential likelihood and the
//! field activations.

use std::f64::consts::PI;

use super::AutodiffError;

/// Arguments to `exp` are clamped here so the result stays finite.
pub const EXP_CLAMP: f64 = 700.0;

/// Above this input `softplus(x)` is returned as `x`.
pub const SOFTPLUS_LINEAR: f64 = 30.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn lgamma(x: f64) -> Result<f64, AutodiffError> {
    if x.is_nan() || x <= 0.0 {
        return Err(AutodiffError::Domain { op: "lgamma", value: x });
    }
    Ok(lgamma_unchecked(x))
}

/// `ln Γ(x)` without the domain check. Returns NaN for `x <= 0`.
pub fn lgamma_unchecked(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - lgamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series in 1/x^2 (Bernoulli numbers)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - series
}

pub fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_LINEAR {
        x
    } else {
        x.max(0.0) + ln_1p_fast((-x.abs()).exp())
    }
}

/// `ln(1 + u)` for `u >= 0`, accurate to a few ulps. Cheaper than the libm
/// `log1p`: the rounding of `1 + u` is undone by rescaling with the exactly
/// representable increment (Goldberg's method).
fn ln_1p_fast(u: f64) -> f64 {
    let w = 1.0 + u;
    if w == 1.0 {
        u
    } else {
        w.ln() * u / (w - 1.0)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `exp(min(x, EXP_CLAMP))`.
pub fn exp_guarded(x: f64) -> f64 {
    x.min(EXP_CLAMP).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values: 40-digit evaluation with mpmath
    const LGAMMA_REF: [(f64, f64); 11] = [
        (0.1, 2.252712651734205959869702),
        (0.5, 0.5723649429247000870717137),
        (1.5, -0.1207822376352452223455184),
        (2.5, 0.2846828704729191596324947),
        (3.7, 1.428072326665387921872381),
        (7.25, 7.052185450738539444925749),
        (10.0, 12.80182748008146961120772),
        (123.456, 469.6055471299294687300692),
        (1000.0, 5905.220423209181211826077),
        (54321.5, 537923.6480392066711084601),
        (1_000_000.0, 12815504.56914761165997697),
    ];

    const DIGAMMA_REF: [(f64, f64); 6] = [
        (0.1, -10.42375494041107679516822),
        (0.5, -1.963510026021423479440976),
        (1.5, 0.03648997397857652055902367),
        (3.7, 1.167153539361511385873864),
        (123.456, 4.811829323828985387322188),
        (1_000_000.0, 13.81551005796419077077462),
    ];

    #[test]
    fn lgamma_exact_points() {
        assert!(lgamma(1.0).unwrap().abs() < 1e-14);
        assert!(lgamma(2.0).unwrap().abs() < 1e-14);
        assert!((lgamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-13);
    }

    #[test]
    fn lgamma_against_reference() {
        for (x, want) in LGAMMA_REF {
            let got = lgamma(x).unwrap();
            // absolute 1e-10 where representable; beyond |lnΓ| > 1 the
            // f64 spacing forces a relative bound
            let tol = 1e-10 * want.abs().max(1.0);
            assert!((got - want).abs() <= tol, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn lgamma_rejects_nonpositive() {
        assert!(lgamma(0.0).is_err());
        assert!(lgamma(-1.5).is_err());
        assert!(lgamma(f64::NAN).is_err());
    }

    #[test]
    fn digamma_against_reference() {
        for (x, want) in DIGAMMA_REF {
            let got = digamma(x);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "x={x}: {got} vs {want}");
        }
        // ψ(1) = -γ_E
        let d1 = digamma(1.0);
        assert!((d1 + 0.577_215_664_901_532_9).abs() < 1e-12, "{d1}");
    }

    #[test]
    fn digamma_matches_lgamma_difference() {
        let h = 1e-5;
        let fd = (lgamma(1.0 + h).unwrap() - lgamma(1.0 - h).unwrap()) / (2.0 * h);
        assert!((fd - digamma(1.0)).abs() < 1e-9);
    }

    #[test]
    fn activations() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(100.0) - 100.0).abs() < 1e-12);
        assert!((softplus(30.5) - 30.5).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(sigmoid(-1e4), 0.0);
        assert_eq!(sigmoid(1e4), 1.0);
        assert!(sigmoid(-40.0) > 0.0);
        assert!(exp_guarded(1e6).is_finite());
        for x in [-40.0f64, -20.0, -3.3, -1e-3, 0.0, 1e-9, 0.7, 5.0, 29.0] {
            let want: f64 = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
            assert!((softplus(x) - want).abs() <= 4.0 * f64::EPSILON * want, "{x}");
        }
    }
}

use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{check_gradients, Gradients};
use crate::evidential::oracle::{mc_oracle_moments, random_point_prior, HierarchySpec, PointPrior};
use crate::evidential::{nig_moments, nll_loss_var, reg_loss_var};
use crate::field::FieldConfig;

/// Generator whose every draw maps to the middle of the unit interval.
struct MidRng;

impl RngCore for MidRng {
    fn next_u32(&mut self) -> u32 {
        1 << 31
    }
    fn next_u64(&mut self) -> u64 {
        1 << 63
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0x80);
    }
}

fn ray(t_near: f64, t_far: f64) -> Ray {
    Ray::new([0.0, 0.0, 3.0], [0.0, 0.0, -1.0], t_near, t_far).unwrap()
}

fn point(c: f64, au: f64, eu: f64, shape: f64) -> PointPrediction {
    PointPrediction {
        mean_color: [c; 3],
        aleatoric: au,
        epistemic: eu,
        shape_score: shape,
        density: 1.0,
    }
}

#[test]
fn stratified_examples() {
    let t = sample_stratified(&ray(1e-14, 1.0), 1, &mut MidRng).unwrap();
    assert!((t[0] - 0.5).abs() < 1e-12, "{t:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = sample_stratified(&ray(1e-12, 4.0), 4, &mut rng).unwrap();
    for (i, &ti) in t.iter().enumerate() {
        assert!(ti > i as f64 && ti < i as f64 + 1.0, "{t:?}");
    }
    assert!(matches!(
        sample_stratified(&ray(1.0, 2.0), 0, &mut rng),
        Err(RenderError::ZeroSamples)
    ));
}

#[test]
fn stratified_golden() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let t = sample_stratified(&ray(2.0, 4.0), 4, &mut rng).unwrap();
    let again = sample_stratified(&ray(2.0, 4.0), 4, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert_eq!(t, again);
    let golden = [2.3409480961533355, 2.975137703836242, 3.21375820142826, 3.8136802605986704];
    for (a, b) in t.iter().zip(golden) {
        assert!((a - b).abs() < 1e-15, "{t:?}");
    }
}

#[test]
fn invalid_rays() {
    assert!(Ray::new([0.0; 3], [0.0, 0.0, 2.0], 1.0, 2.0).is_err());
    assert!(Ray::new([0.0; 3], [0.0, 0.0, 1.0], 2.0, 1.0).is_err());
    assert!(Ray::new([f64::NAN, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 2.0).is_err());
}

#[test]
fn weight_examples() {
    assert_eq!(compute_weights(&[0.0], &[0.7]).unwrap(), vec![0.0]);
    let w = compute_weights(&[1e9], &[1.0]).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-12);
    let w = compute_weights(&[1.0, 2.0], &[1.0, 0.5]).unwrap();
    assert!((w[0] - 0.6321206).abs() < 1e-6);
    assert!((w[1] - 0.2325442).abs() < 1e-6);
    assert!(matches!(
        compute_weights(&[-1.0], &[1.0]),
        Err(RenderError::NegativeDensity(..))
    ));
}

#[test]
fn last_interval_reaches_far_plane() {
    assert_eq!(intervals(&[1.0, 1.5, 2.5], 3.0), vec![0.5, 1.0, 0.5]);
}

#[test]
fn composite_single_point() {
    let cfg = RenderConfig::default();
    let p = composite(&[1.0], &[point(0.3, 0.01, 0.02, 1.5)], &cfg).unwrap();
    assert!((p.mean_color[0] - 0.3).abs() < 1e-15);
    assert!((p.aleatoric - 0.01).abs() < 1e-15);
    assert!((p.epistemic - 0.02).abs() < 1e-15);
    assert!((p.total - 0.03).abs() < 1e-15);
    assert!((p.alpha - 2.5).abs() < 1e-15);
    assert!((p.nu - 0.5).abs() < 1e-15);
    assert!((p.beta - 0.015).abs() < 1e-15);
    assert!(!p.empty);
}

#[test]
fn composite_two_points() {
    let cfg = RenderConfig {
        background: [0.0; 3],
        ..RenderConfig::default()
    };
    let pts = [point(1.0, 0.01, 0.02, 1.0), point(0.0, 0.04, 0.01, 2.0)];
    let p = composite(&[0.6, 0.3], &pts, &cfg).unwrap();
    assert!((p.mean_color[0] - 0.6).abs() < 1e-12);
    assert!((p.aleatoric - 0.0072).abs() < 1e-12);
    assert!((p.epistemic - 0.0081).abs() < 1e-12);
    assert!((p.total - 0.0153).abs() < 1e-12);
    assert!((p.alpha - (1.0 + 4.0 / 3.0)).abs() < 1e-12);
    assert!((p.nu - 0.0072 / 0.0081).abs() < 1e-12);
    assert!((p.beta - 0.0072 * 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(p.gamma, p.mean_color);
}

#[test]
fn background_fills_transparent_part() {
    let cfg = RenderConfig {
        background: [1.0, 0.0, 0.5],
        ..RenderConfig::default()
    };
    let p = composite(&[0.25], &[point(0.0, 0.01, 0.01, 1.0)], &cfg).unwrap();
    assert!((p.mean_color[0] - 0.75).abs() < 1e-15);
    assert_eq!(p.mean_color[1], 0.0);
    assert!((p.mean_color[2] - 0.375).abs() < 1e-15);
    assert!((p.aleatoric - 0.0625 * 0.01).abs() < 1e-15);
}

#[test]
fn empty_ray_falls_back() {
    let cfg = RenderConfig::default();
    let p = composite(&[1e-10, 0.0], &[point(0.9, 0.1, 0.1, 1.0); 2], &cfg).unwrap();
    assert!(p.empty);
    assert_eq!(p.mean_color, cfg.background);
    assert_eq!(p.aleatoric, cfg.eps_u);
    assert_eq!(p.epistemic, cfg.eu_max);
    assert_eq!(p.alpha, 2.0);
}

#[test]
fn epistemic_floor_stays_at_floor() {
    let cfg = RenderConfig::default();
    let eps = cfg.eps_u;
    let w = compute_weights(&[0.5, 1.0, 3.0, 0.2], &[0.3, 0.3, 0.3, 0.3]).unwrap();
    let pts = [point(0.5, 0.02, eps, 1.0); 4];
    let p = composite(&w, &pts, &cfg).unwrap();
    assert!(p.epistemic <= eps);
}

fn weights_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..24).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..50.0, n),
            prop::collection::vec(1e-3f64..0.5, n),
        )
    })
}

proptest! {
    #[test]
    fn weights_telescope((rho, delta) in weights_strategy()) {
        let w = compute_weights(&rho, &delta).unwrap();
        let total: f64 = rho.iter().zip(&delta).map(|(r, d)| r * d).sum();
        let sum: f64 = w.iter().sum();
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(sum <= 1.0 + 1e-9);
        prop_assert!((sum - (1.0 - (-total).exp())).abs() < 1e-9);
    }

    #[test]
    fn pixel_invariants(
        (rho, delta) in weights_strategy(),
        seed in any::<u64>(),
    ) {
        let cfg = RenderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let pts: Vec<_> = rho
            .iter()
            .map(|_| PointPrediction {
                mean_color: [rng.random(), rng.random(), rng.random()],
                aleatoric: rng.random_range(1e-6..0.5),
                epistemic: rng.random_range(1e-6..0.5),
                shape_score: rng.random_range(1e-6..10.0),
                density: 0.0,
            })
            .collect();
        let w = compute_weights(&rho, &delta).unwrap();
        let p = composite(&w, &pts, &cfg).unwrap();
        prop_assert!(p.alpha > 1.0);
        prop_assert!(p.nu > 0.0 && p.beta > 0.0);
        prop_assert!((p.total - (p.aleatoric + p.epistemic)).abs() <= 1e-12 * p.total);
        prop_assert!(p.mean_color.iter().all(|c| (-1e-12..=1.0 + 1e-12).contains(c)));
        prop_assert_eq!(p.gamma, p.mean_color);
    }
}

#[test]
fn normalized_weights_sum_to_one() {
    let s = RaySamples::new(vec![1.0, 1.2, 1.9], 2.5, &[0.4, 2.0, 1.0], 1e-8).unwrap();
    let sum: f64 = s.normalized.as_ref().unwrap().iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
    let s = RaySamples::new(vec![1.0, 1.2], 2.5, &[0.0, 0.0], 1e-8).unwrap();
    assert!(s.normalized.is_none());
}

#[test]
fn closed_form_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    use rand::Rng;
    for trial in 0..2 {
        let rho: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..3.0)).collect();
        let w = compute_weights(&rho, &[0.25; 8]).unwrap();
        let priors: Vec<_> = (0..8).map(|_| random_point_prior(&mut rng)).collect();
        let (mut au, mut eu, mut mean) = (0.0, 0.0, 0.0);
        for (wi, p) in w.iter().zip(&priors) {
            let PointPrior::Nig(n) = p else { unreachable!() };
            let m = nig_moments(n).unwrap();
            au += wi * wi * m.aleatoric;
            eu += wi * wi * m.epistemic;
            mean += wi * m.mean;
        }
        let spec = HierarchySpec {
            weights: w,
            priors,
        };
        let est = mc_oracle_moments(&spec, 1_000_000, 100 + trial).unwrap();
        assert!(est.mean.z_score(mean).abs() < 3.0);
        assert!(est.aleatoric.z_score(au).abs() < 3.0);
        assert!(est.epistemic.z_score(eu).abs() < 3.0);
        assert!(est.total.z_score(au + eu).abs() < 3.0);
    }
}

fn small_field(seed: u64) -> FieldParams {
    let cfg = FieldConfig {
        l_pos: 2,
        l_dir: 1,
        width: 8,
        depth: 2,
        eps_u: 1e-6,
    };
    FieldParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn test_rays() -> Vec<Ray> {
    [
        ([0.1, 0.2, 3.0], [0.05, -0.02, -1.0]),
        ([2.5, 0.3, 0.4], [-1.0, 0.1, 0.0]),
        ([-0.3, 2.8, 0.2], [0.1, -1.0, 0.05]),
        ([0.0, -0.4, -3.0], [0.0, 0.1, 1.0]),
    ]
    .into_iter()
    .map(|(o, d)| Ray::new(o, math::normalize(d), 1.5, 4.5).unwrap())
    .collect()
}

#[test]
fn tape_render_matches_plain_render() {
    let mut params = small_field(1);
    // push the density up so rays actually hit something
    let b = params.density.bias;
    params.store.value_mut(b).fill(2.0);
    let cfg = RenderConfig {
        samples: 16,
        ..RenderConfig::default()
    };
    let rays = test_rays();
    for sampling in [Sampling::Midpoint, Sampling::Stratified(9)] {
        let plain = render_rays(&params, &rays, &cfg, sampling).unwrap();
        let depths: Vec<_> = rays
            .iter()
            .enumerate()
            .map(|(i, r)| depths_for(r, cfg.samples, sampling, i).unwrap())
            .collect();
        let mut tape = Tape::new();
        let pv = render_rays_var(&mut tape, &params, &params.store, &rays, &depths, &cfg);
        for (i, p) in plain.iter().enumerate() {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
            for k in 0..3 {
                assert!(close(tape.value(pv.rgb)[[i, k]], p.mean_color[k]));
            }
            assert!(close(tape.value(pv.aleatoric)[[i, 0]], p.aleatoric));
            assert!(close(tape.value(pv.epistemic)[[i, 0]], p.epistemic));
            assert!(close(tape.value(pv.alpha)[[i, 0]], p.alpha));
            assert!(close(tape.value(pv.nu)[[i, 0]], p.nu));
            assert!(close(tape.value(pv.beta)[[i, 0]], p.beta));
            assert_eq!(pv.empty[i], p.empty);
        }
    }
}

#[test]
fn tape_render_empty_rays_stay_finite() {
    let mut params = small_field(2);
    params.zero_output_layers();
    let b = params.density.bias;
    params.store.value_mut(b).fill(-60.0);
    let cfg = RenderConfig {
        samples: 8,
        ..RenderConfig::default()
    };
    let rays = test_rays();
    let depths: Vec<_> = rays.iter().map(|r| sample_midpoints(r, 8).unwrap()).collect();
    let mut tape = Tape::new();
    let pv = render_rays_var(&mut tape, &params, &params.store, &rays, &depths, &cfg);
    assert!(pv.empty.iter().all(|&e| e));
    assert_eq!(tape.value(pv.alpha)[[0, 0]], 2.0);
    assert_eq!(tape.value(pv.epistemic)[[0, 0]], cfg.eu_max);
    let target = tape.constant(Array2::from_elem((rays.len(), 3), 0.3));
    let nig = nig_vars(&pv);
    let nll = nll_loss_var(&mut tape, target, &nig);
    let root = tape.sum_all(nll);
    let mut g = Gradients::zeros_like(&params.store);
    tape.backward(root, &mut g).unwrap();
}

#[test]
fn loss_through_renderer_passes_gradient_check() {
    let mut params = small_field(3);
    let b = params.density.bias;
    params.store.value_mut(b).fill(1.0);
    let arch = params.clone();
    let cfg = RenderConfig {
        samples: 6,
        ..RenderConfig::default()
    };
    let rays = test_rays();
    let depths: Vec<_> = rays
        .iter()
        .enumerate()
        .map(|(i, r)| depths_for(r, 6, Sampling::Stratified(4), i).unwrap())
        .collect();
    let target = Array2::from_shape_fn((rays.len(), 3), |(i, k)| 0.1 + 0.2 * i as f64 + 0.05 * k as f64);
    let err = check_gradients(&mut params.store, 1e-4, |t, s| {
        let pv = render_rays_var(t, &arch, s, &rays, &depths, &cfg);
        let target = t.constant(target.clone());
        let nig = nig_vars(&pv);
        let nll = nll_loss_var(t, target, &nig);
        let reg = reg_loss_var(t, target, &nig);
        let reg = t.scale(reg, 1e-2);
        let total = t.add(nll, reg);
        t.sum_all(total)
    })
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

//! Point-to-pixel uncertainty propagation: the compositing rule for the
//! pixel mean, aleatoric and epistemic variance, checked against direct
//! sampling of the hierarchical model along one ray.

use evnerf::evidential::nig_moments;
use evnerf::evidential::oracle::{mc_oracle_moments, random_point_prior, HierarchySpec, PointPrior};
use evnerf::field::PointPrediction;
use evnerf::render::{composite, compute_weights, RenderConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let density: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..3.0)).collect();
    let weights = compute_weights(&density, &[0.25; 8]).unwrap();
    let priors: Vec<PointPrior> = (0..8).map(|_| random_point_prior(&mut rng)).collect();
    let points: Vec<PointPrediction> = priors
        .iter()
        .zip(&density)
        .map(|(p, &density)| {
            let PointPrior::Nig(n) = p else { unreachable!() };
            let m = nig_moments(n).unwrap();
            PointPrediction {
                mean_color: [m.mean; 3],
                aleatoric: m.aleatoric,
                epistemic: m.epistemic,
                shape_score: 1.0,
                density,
            }
        })
        .collect();
    let cfg = RenderConfig {
        background: [0.0; 3],
        ..RenderConfig::default()
    };
    let px = composite(&weights, &points, &cfg).unwrap();
    let est = mc_oracle_moments(&HierarchySpec { weights, priors }, 2_000_000, 1).unwrap();

    println!("{:<10} {:>12} {:>12} {:>10} {:>6}", "", "closed", "sampled", "se", "z");
    for (name, closed, e) in [
        ("mean", px.mean_color[0], est.mean),
        ("total", px.total, est.total),
        ("aleatoric", px.aleatoric, est.aleatoric),
        ("epistemic", px.epistemic, est.epistemic),
    ] {
        println!("{name:<10} {closed:>12.6e} {:>12.6e} {:>10.2e} {:>6.2}", e.value, e.se, e.z_score(closed));
    }
}

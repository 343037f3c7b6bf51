//! Epistemic uncertainty on unseen viewpoints: a field trained only on a
//! front arc of cameras is rendered from the front and from the back.

use evnerf::field::{FieldConfig, FieldParams};
use evnerf::render::RenderConfig;
use evnerf::scene::{generate_views, CameraRing, SceneSpec, View};
use evnerf::train::{render_camera, train, Objective, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_eu(params: &FieldParams, views: &[View], scene: &SceneSpec, render: &RenderConfig) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in views {
        let r = render_camera(params, &v.camera, &scene.bounds, render).expect("render");
        for (e, _) in r.epistemic.values.iter().zip(&v.foreground).filter(|(_, &f)| f) {
            s += e;
            n += 1;
        }
    }
    s / n as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: usize = std::env::args().nth(1).map_or(Ok(1500), |s| s.parse())?;
    let scene = SceneSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train_views = generate_views(&scene, &CameraRing::front(32, 32, 60.0), 12, &mut rng)?;
    let render = RenderConfig {
        background: scene.background,
        ..RenderConfig::default()
    };
    let cfg = TrainConfig {
        objective: Objective::Evidential,
        iterations,
        batch: 256,
        samples: 32,
        lr: 5e-3,
        ..TrainConfig::default()
    };
    let field = FieldConfig {
        width: 32,
        depth: 2,
        ..FieldConfig::default()
    };
    let (params, _) = train(&train_views.views, &[], &scene.bounds, field, cfg, render)?;

    println!("{:>9} {:>12}", "azimuth", "mean EU");
    for az in (0..360).step_by(30) {
        let ring = CameraRing {
            azimuth_start_deg: az as f64,
            azimuth_end_deg: az as f64,
            ..CameraRing::full(32, 32)
        };
        let views = generate_views(&scene, &ring, 1, &mut rng)?;
        let tag = if az <= 60 || az >= 300 { "seen" } else { "" };
        println!("{az:>9} {:>12.4e} {tag}", mean_eu(&params, &views.views, &scene, &render));
    }
    Ok(())
}

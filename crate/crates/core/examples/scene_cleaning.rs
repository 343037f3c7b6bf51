//! Scene cleaning: training images carry random occluders that appear in
//! only one view each. The field explains them with high aleatoric
//! uncertainty, so suppressing density where AU exceeds a threshold removes
//! the floaters they leave behind.

use evnerf::apps::{clean_render, CleaningConfig};
use evnerf::field::FieldConfig;
use evnerf::io::write_png;
use evnerf::metrics::{image_mse, psnr_from_mse};
use evnerf::render::RenderConfig;
use evnerf::scene::{DatasetConfig, SceneSpec};
use evnerf::train::{train, Objective, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: usize = std::env::args().nth(1).map_or(Ok(1500), |s| s.parse())?;
    let scene = SceneSpec::default();
    let data = DatasetConfig {
        width: 32,
        height: 32,
        transients: 1,
        ..DatasetConfig::default()
    }
    .build(&scene)?;
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
    let (params, _) = train(&data.train.views, &[], &scene.bounds, field, cfg, render)?;

    std::fs::create_dir_all("out/scene_cleaning")?;
    write_png(&data.train.views[0].image, "out/scene_cleaning/train_view.png")?;
    for tau in [f64::INFINITY, 1.0, 0.3, 0.1, 0.03, 0.01] {
        let cc = CleaningConfig::new(tau, 0.0)?;
        let mut mse = 0.0;
        for (k, v) in data.test.views.iter().enumerate() {
            let r = clean_render(&params, &v.camera, &scene.bounds, &render, &cc)?;
            mse += image_mse(&r.color, &v.clean);
            if k == 0 {
                write_png(&r.color, format!("out/scene_cleaning/tau_{tau}.png"))?;
            }
        }
        mse /= data.test.len() as f64;
        println!("threshold {tau:>6}: test MSE {mse:.5}  PSNR {:.2} dB", psnr_from_mse(mse));
    }
    Ok(())
}

//! Aleatoric uncertainty follows data noise: training images get σ = 0.1
//! noise on the half of the scene with x > 0, and the trained field's AU on
//! held-out views is compared inside and outside that region.

use evnerf::field::FieldConfig;
use evnerf::io::write_colormap_png;
use evnerf::render::RenderConfig;
use evnerf::scene::{region_mask, DatasetConfig, NoiseRegion, SceneSpec};
use evnerf::train::{render_camera, train, Objective, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: usize = std::env::args().nth(1).map_or(Ok(1500), |s| s.parse())?;
    let scene = SceneSpec::default();
    let region = NoiseRegion::HalfSpace {
        normal: [1.0, 0.0, 0.0],
        offset: 0.0,
    };
    let data = DatasetConfig {
        width: 32,
        height: 32,
        noise_sigma: 0.1,
        noise_region: region,
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

    let (mut sum, mut n) = ([0.0; 2], [0usize; 2]);
    for v in &data.test.views {
        let r = render_camera(&params, &v.camera, &scene.bounds, &render)?;
        let noisy = region_mask(v, region);
        for i in (0..noisy.len()).filter(|&i| v.foreground[i]) {
            let k = usize::from(!noisy[i]);
            sum[k] += r.aleatoric.values[i];
            n[k] += 1;
        }
    }
    let (inside, outside) = (sum[0] / n[0] as f64, sum[1] / n[1] as f64);
    println!("mean test AU, noisy region: {inside:.4e} ({} px)", n[0]);
    println!("mean test AU, clean region: {outside:.4e} ({} px)", n[1]);
    println!("ratio {:.2}", inside / outside);

    std::fs::create_dir_all("out/aleatoric_noise")?;
    let r = render_camera(&params, &data.test.views[0].camera, &scene.bounds, &render)?;
    write_colormap_png(&r.aleatoric, "out/aleatoric_noise/au.png")?;
    Ok(())
}

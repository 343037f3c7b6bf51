//! Trains an evidential field on the built-in scene, then renders one test
//! view with its color, aleatoric, epistemic and total uncertainty maps.
//!
//! cargo run --release --example train_evidential -- [iterations] [out_dir]

use std::path::PathBuf;

use evnerf::field::{save_checkpoint, FieldConfig};
use evnerf::io::{write_colormap_png, write_pfm, write_png};
use evnerf::render::RenderConfig;
use evnerf::scene::{DatasetConfig, SceneSpec};
use evnerf::train::{evaluate, render_camera, train, Objective, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map_or(Ok(1500), |s| s.parse())?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/train_evidential".into()));
    std::fs::create_dir_all(&out)?;

    let scene = SceneSpec::default();
    let data = DatasetConfig {
        width: 32,
        height: 32,
        ..DatasetConfig::default()
    }
    .build(&scene)?;
    let field = FieldConfig {
        width: 32,
        depth: 2,
        ..FieldConfig::default()
    };
    let cfg = TrainConfig {
        objective: Objective::Evidential,
        iterations,
        batch: 256,
        samples: 32,
        lr: 5e-3,
        eval_interval: iterations.div_ceil(5).max(1),
        ..TrainConfig::default()
    };
    let render = RenderConfig {
        background: scene.background,
        ..RenderConfig::default()
    };
    let (params, trace) = train(&data.train.views, &data.test.views, &scene.bounds, field, cfg, render)?;
    for r in &trace {
        println!(
            "step {:>5}  loss {:>8.4}  nll {:>8.4}  reg {:.4}  test PSNR {:.2} dB",
            r.iteration,
            r.total,
            r.nll,
            r.reg,
            r.psnr_eval.unwrap_or(f64::NAN)
        );
    }
    let row = evaluate(&params, &data.test.views, &scene.bounds, &render, Objective::Evidential, "default")?;
    println!(
        "test: PSNR {:.2} SSIM {:.4} NLL {:.3} AUSE-RMSE {:.4} AUSE-MAE {:.4}",
        row.psnr,
        row.ssim,
        row.nll.unwrap_or(f64::NAN),
        row.ause_rmse.unwrap_or(f64::NAN),
        row.ause_mae.unwrap_or(f64::NAN)
    );

    save_checkpoint(&params, out.join("checkpoint.evf"))?;
    let r = render_camera(&params, &data.test.views[0].camera, &scene.bounds, &render)?;
    write_png(&r.color, out.join("color.png"))?;
    for (tag, map) in [("au", &r.aleatoric), ("eu", &r.epistemic), ("u", &r.total)] {
        write_pfm(map, out.join(format!("{tag}.pfm")))?;
        write_colormap_png(map, out.join(format!("{tag}.png")))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

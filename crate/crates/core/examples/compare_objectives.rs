//! The three training objectives on the same data: plain photometric loss,
//! a Gaussian likelihood with a per-point variance, and the evidential
//! likelihood with its regularizer.

use evnerf::field::FieldConfig;
use evnerf::metrics::write_metrics_csv;
use evnerf::render::RenderConfig;
use evnerf::scene::{DatasetConfig, SceneSpec};
use evnerf::train::{evaluate, train, Objective, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: usize = std::env::args().nth(1).map_or(Ok(1000), |s| s.parse())?;
    let scene = SceneSpec::default();
    let data = DatasetConfig {
        width: 32,
        height: 32,
        noise_sigma: 0.05,
        ..DatasetConfig::default()
    }
    .build(&scene)?;
    let render = RenderConfig {
        background: scene.background,
        ..RenderConfig::default()
    };
    let field = FieldConfig {
        width: 32,
        depth: 2,
        ..FieldConfig::default()
    };
    let mut rows = Vec::new();
    for objective in [Objective::Vanilla, Objective::Normal, Objective::Evidential] {
        let cfg = TrainConfig {
            objective,
            iterations,
            batch: 256,
            samples: 32,
            lr: 5e-3,
            ..TrainConfig::default()
        };
        let (params, _) = train(&data.train.views, &[], &scene.bounds, field, cfg, render)?;
        rows.push(evaluate(&params, &data.test.views, &scene.bounds, &render, objective, "noisy")?);
    }
    write_metrics_csv(std::io::stdout(), &rows)?;
    Ok(())
}

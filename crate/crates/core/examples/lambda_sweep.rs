//! Sensitivity to the regularization weight: one evidential field per
//! value, all from the same seed and data, with quality and uncertainty
//! metrics on the test views.

use evnerf::field::FieldConfig;
use evnerf::metrics::write_metrics_csv;
use evnerf::render::RenderConfig;
use evnerf::scene::{DatasetConfig, SceneSpec};
use evnerf::train::{evaluate, train, Objective, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations: usize = std::env::args().nth(1).map_or(Ok(800), |s| s.parse())?;
    let scene = SceneSpec::default();
    let data = DatasetConfig {
        width: 32,
        height: 32,
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
    for lambda in [1e-3, 1e-2, 1e-1, 1.0] {
        let cfg = TrainConfig {
            objective: Objective::Evidential,
            lambda_reg: lambda,
            iterations,
            batch: 256,
            samples: 32,
            lr: 5e-3,
            ..TrainConfig::default()
        };
        let (params, _) = train(&data.train.views, &[], &scene.bounds, field, cfg, render)?;
        let mut row = evaluate(&params, &data.test.views, &scene.bounds, &render, Objective::Evidential, "default")?;
        row.method = format!("evidential-lambda-{lambda}");
        rows.push(row);
    }
    write_metrics_csv(std::io::stdout(), &rows)?;
    Ok(())
}

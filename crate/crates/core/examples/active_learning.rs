//! Active view selection: starting from a few views of a 30-view pool,
//! each round adds the views whose renders carry the most epistemic
//! uncertainty, against a random-selection control from the same start.

use evnerf::apps::{active_learn, write_active_csv, ActiveLearnConfig, Strategy};
use evnerf::field::FieldConfig;
use evnerf::render::RenderConfig;
use evnerf::scene::{DatasetConfig, SceneSpec};
use evnerf::train::{Objective, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let scene = SceneSpec::default();
    let data = DatasetConfig {
        width: 32,
        height: 32,
        train_views: 30,
        ..DatasetConfig::default()
    }
    .build(&scene)?;
    let render = RenderConfig {
        background: scene.background,
        ..RenderConfig::default()
    };
    let train_cfg = TrainConfig {
        objective: Objective::Evidential,
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
    let mut rows = Vec::new();
    for strategy in [Strategy::Eu, Strategy::Random] {
        let cfg = ActiveLearnConfig {
            initial_views: 3,
            rounds: 3,
            views_per_round: 3,
            epochs_per_round: 4,
            strategy,
            score_downscale: 4,
        };
        let run = active_learn(
            &data.train.views,
            &data.test.views,
            &scene.bounds,
            field,
            train_cfg,
            render,
            &cfg,
            seed,
        )?;
        println!("{:>6}: picked views {:?}", strategy.name(), run.selected);
        rows.extend(run.rows);
    }
    write_active_csv(std::io::stdout(), &rows)?;
    Ok(())
}

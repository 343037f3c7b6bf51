//! Scene cleaning by aleatoric-uncertainty thresholding, and active view
//! selection driven by epistemic uncertainty.

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldConfig, FieldParams};
use crate::render::{RenderConfig, RenderError};
use crate::scene::{Bounds, View};
use crate::train::{self, render_camera, render_camera_with, RenderedView, TrainConfig, TrainError, Trainer, TrainingSet};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("view pool exhausted: need {need} views, have {have}")]
    PoolExhausted { need: usize, have: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleaningConfig {
    /// Points with aleatoric uncertainty above this are attenuated.
    pub threshold: f64,
    /// Multiplier applied to the density of those points.
    pub attenuation: f64,
}

impl CleaningConfig {
    pub fn new(threshold: f64, attenuation: f64) -> Result<Self, AppError> {
        if !(threshold > 0.0) {
            return Err(AppError::Config(format!("threshold must be > 0, got {threshold}")));
        }
        if !(0.0..=1.0).contains(&attenuation) {
            return Err(AppError::Config(format!("attenuation must lie in [0, 1], got {attenuation}")));
        }
        Ok(Self { threshold, attenuation })
    }
}

/// Renders `view`'s camera with the density of every high-AU point scaled
/// down before weights are computed.
pub fn clean_render(
    params: &FieldParams,
    camera: &crate::scene::Camera,
    bounds: &Bounds,
    render_cfg: &RenderConfig,
    cfg: &CleaningConfig,
) -> Result<RenderedView, RenderError> {
    render_camera_with(params, camera, bounds, render_cfg, |p| {
        if p.aleatoric > cfg.threshold {
            p.density *= cfg.attenuation;
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Highest mean epistemic uncertainty first.
    Eu,
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Eu => "eu",
            Strategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveLearnConfig {
    pub initial_views: usize,
    pub rounds: usize,
    pub views_per_round: usize,
    /// Passes over the current training pixels per round (round 0 included).
    pub epochs_per_round: usize,
    pub strategy: Strategy,
    /// Candidate views are scored on renders downscaled by this factor.
    pub score_downscale: usize,
}

impl Default for ActiveLearnConfig {
    fn default() -> Self {
        Self {
            initial_views: 5,
            rounds: 5,
            views_per_round: 5,
            epochs_per_round: 5,
            strategy: Strategy::Eu,
            score_downscale: 4,
        }
    }
}

impl ActiveLearnConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        if self.initial_views == 0 || self.views_per_round == 0 || self.epochs_per_round == 0 {
            return Err(AppError::Config(
                "initial_views, views_per_round and epochs_per_round must be >= 1".into(),
            ));
        }
        if self.score_downscale == 0 {
            return Err(AppError::Config("score_downscale must be >= 1".into()));
        }
        Ok(())
    }

    pub fn views_needed(&self) -> usize {
        self.initial_views + self.rounds * self.views_per_round
    }
}

/// One row of the active-learning table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveRow {
    pub round: usize,
    pub strategy: String,
    pub seed: u64,
    pub n_views: usize,
    pub psnr: f64,
}

pub fn write_active_csv(out: impl Write, rows: &[ActiveRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean pixel EU over the in-bounds pixels of a low-resolution render.
pub fn eu_score(
    params: &FieldParams,
    view: &View,
    bounds: &Bounds,
    render_cfg: &RenderConfig,
    downscale: usize,
) -> Result<f64, RenderError> {
    let cam = view.camera.downscaled(downscale);
    let inside: Vec<bool> = cam.rays(bounds).iter().map(Option::is_some).collect();
    let r = render_camera(params, &cam, bounds, render_cfg)?;
    let (s, n) = r
        .epistemic
        .values
        .iter()
        .zip(&inside)
        .filter(|(_, &i)| i)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    Ok(if n == 0 { render_cfg.eu_max } else { s / n as f64 })
}

/// Outcome of one active-learning run.
#[derive(Debug, Clone)]
pub struct ActiveRun {
    pub rows: Vec<ActiveRow>,
    /// Pool indices in the order they joined the training set.
    pub selected: Vec<usize>,
    pub params: FieldParams,
}

/// Grows a training set from `pool`, training between rounds and logging
/// held-out PSNR on `test`. The initial views depend only on `seed`, so both
/// strategies start from the same set.
#[allow(clippy::too_many_arguments)]
pub fn active_learn(
    pool: &[View],
    test: &[View],
    bounds: &Bounds,
    field: FieldConfig,
    train_cfg: TrainConfig,
    render_cfg: RenderConfig,
    cfg: &ActiveLearnConfig,
    seed: u64,
) -> Result<ActiveRun, AppError> {
    cfg.validate()?;
    if pool.len() < cfg.views_needed() {
        return Err(AppError::PoolExhausted {
            need: cfg.views_needed(),
            have: pool.len(),
        });
    }
    let mut pick_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = index::sample(&mut pick_rng, pool.len(), cfg.initial_views).into_vec();
    let mut rand_rng = ChaCha8Rng::seed_from_u64(seed);
    rand_rng.set_stream(2);

    let train_cfg = TrainConfig { seed, ..train_cfg };
    let mut trainer = Trainer::new(field, train_cfg, render_cfg)?;
    let mut data = TrainingSet::default();
    for &i in &selected {
        data.extend_view(&pool[i], bounds);
    }
    let mut rows = Vec::new();
    for round in 0..=cfg.rounds {
        if round > 0 {
            let remaining: Vec<usize> = (0..pool.len()).filter(|i| !selected.contains(i)).collect();
            let chosen: Vec<usize> = match cfg.strategy {
                Strategy::Random => index::sample(&mut rand_rng, remaining.len(), cfg.views_per_round)
                    .into_iter()
                    .map(|k| remaining[k])
                    .collect(),
                Strategy::Eu => {
                    let mut scored = Vec::with_capacity(remaining.len());
                    for &i in &remaining {
                        let s = eu_score(&trainer.params, &pool[i], bounds, &trainer.render, cfg.score_downscale)?;
                        scored.push((s, i));
                    }
                    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    scored.into_iter().take(cfg.views_per_round).map(|(_, i)| i).collect()
                }
            };
            for i in chosen {
                data.extend_view(&pool[i], bounds);
                selected.push(i);
            }
        }
        let steps = cfg.epochs_per_round * data.len().div_ceil(trainer.config.batch);
        for _ in 0..steps {
            trainer.step(&data)?;
        }
        let psnr = train::mean_psnr(&trainer.params, test, bounds, &trainer.render)?;
        rows.push(ActiveRow {
            round,
            strategy: cfg.strategy.name().to_string(),
            seed,
            n_views: selected.len(),
            psnr,
        });
    }
    Ok(ActiveRun {
        rows,
        selected,
        params: trainer.params,
    })
}

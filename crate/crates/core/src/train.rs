//! Ray-batched optimization of a field with Adam under the evidential,
//! Gaussian or plain-MSE objective.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Gradients, ParamStore, Tape};
use crate::baselines::{gaussian_nll_var, mse_var, NormalPixel};
use crate::evidential::{nll_loss_var, reg_loss_var, EvidentialError, RgbNig};
use crate::field::{FieldConfig, FieldParams, PointPrediction};
use crate::image::{Image, Mask, ScalarMap};
use crate::metrics;
use crate::render::{self, render_rays_var, Ray, RenderConfig, RenderError, Sampling};
use crate::scene::{Bounds, Camera, View};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training pixels")]
    NoData,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite gradient for `{param}` at iteration {iteration}")]
    NonFiniteGradient { iteration: usize, param: String },
    #[error("loss diverged at iteration {iteration} ({source})")]
    Diverged {
        iteration: usize,
        source: AutodiffError,
        /// Parameters before the failing step.
        last_good: Box<FieldParams>,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Evidential(#[from] EvidentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Evidential,
    Normal,
    Vanilla,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Evidential => "evidential",
            Objective::Normal => "normal",
            Objective::Vanilla => "vanilla",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub objective: Objective,
    pub lambda_reg: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Rays per step.
    pub batch: usize,
    pub iterations: usize,
    /// Samples per ray.
    pub samples: usize,
    pub seed: u64,
    /// Steps between trace rows; 0 logs only the final step.
    pub eval_interval: usize,
    /// Rays per worker chunk; gradients are merged in chunk order.
    pub chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Evidential,
            lambda_reg: 1e-2,
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: 1024,
            iterations: 20_000,
            samples: 64,
            seed: 0,
            eval_interval: 1000,
            chunk: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr > 0.0) || !(self.adam_eps > 0.0) {
            return bad("learning rate and adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.lambda_reg >= 0.0) {
            return bad("lambda_reg must be >= 0");
        }
        if self.batch == 0 || self.samples == 0 || self.chunk == 0 {
            return bad("batch, samples and chunk must be positive");
        }
        Ok(())
    }
}

/// Adam moments for every parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Gradients,
    pub v: Gradients,
    pub step: u64,
}

impl OptimState {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            m: Gradients::zeros_like(store),
            v: Gradients::zeros_like(store),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any parameter.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut OptimState,
    cfg: &TrainConfig,
    iteration: usize,
) -> Result<(), TrainError> {
    for id in store.ids() {
        if grads.get(id).iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient {
                iteration,
                param: store.name(id).to_string(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let g = grads.get(id);
        let m = &mut state.m.arrays[id.index()];
        let v = &mut state.v.arrays[id.index()];
        let p = store.value_mut(id);
        ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
        });
    }
    Ok(())
}

/// Training pixels: one in-bounds ray and its target color each.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub rays: Vec<Ray>,
    pub targets: Vec<[f64; 3]>,
}

impl TrainingSet {
    /// Collects every pixel of `views` whose ray crosses `bounds`.
    pub fn from_views(views: &[View], bounds: &Bounds) -> Self {
        let mut set = Self::default();
        for v in views {
            set.extend_view(v, bounds);
        }
        set
    }

    pub fn extend_view(&mut self, view: &View, bounds: &Bounds) {
        for (ray, px) in view.camera.rays(bounds).into_iter().zip(&view.image.pixels) {
            if let Some(r) = ray {
                self.rays.push(r);
                self.targets.push(*px);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

/// Batch-mean loss terms of one step. For the Gaussian objective `nll` is
/// the Gaussian NLL; for the MSE objective it holds the MSE. `reg` is zero
/// for both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub total: f64,
    pub nll: f64,
    pub reg: f64,
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub nll: f64,
    pub reg: f64,
    pub psnr_eval: Option<f64>,
}

/// Writes `iteration,total,nll,reg,psnr_eval`; a missing evaluation is an
/// empty field and infinite PSNR is capped.
pub fn write_trace_csv(out: impl Write, rows: &[TraceRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["iteration", "total", "nll", "reg", "psnr_eval"])?;
    for r in rows {
        let psnr = r.psnr_eval.map(|p| p.min(metrics::PSNR_CAP));
        w.serialize((r.iteration, r.total, r.nll, r.reg, psnr))?;
    }
    w.flush()?;
    Ok(())
}

/// Records the summed per-ray objective for a ray batch, reading weights
/// from `store` (laid out like `params`). Returns the total root together
/// with the values of its data and regularizer terms.
pub fn record_loss(
    tape: &mut Tape,
    params: &FieldParams,
    store: &ParamStore,
    rays: &[Ray],
    depths: &[Vec<f64>],
    targets: &[[f64; 3]],
    render_cfg: &RenderConfig,
    cfg: &TrainConfig,
) -> (crate::autodiff::Var, f64, f64) {
    let pv = render_rays_var(tape, params, store, rays, depths, render_cfg);
    let target = tape.constant(ndarray::Array2::from_shape_fn((targets.len(), 3), |(i, k)| {
        targets[i][k]
    }));
    match cfg.objective {
        Objective::Evidential => {
            let nig = render::nig_vars(&pv);
            let nll = nll_loss_var(tape, target, &nig);
            let reg = reg_loss_var(tape, target, &nig);
            let nll = tape.sum_all(nll);
            let reg = tape.sum_all(reg);
            let weighted = tape.scale(reg, cfg.lambda_reg);
            let total = tape.add(nll, weighted);
            let (n, r) = (tape.scalar_value(nll), tape.scalar_value(reg));
            (total, n, r)
        }
        Objective::Normal => {
            let nll = gaussian_nll_var(tape, target, pv.rgb, pv.aleatoric, render_cfg.eps_u);
            let total = tape.sum_all(nll);
            let n = tape.scalar_value(total);
            (total, n, 0.0)
        }
        Objective::Vanilla => {
            let m = mse_var(tape, target, pv.rgb);
            let total = tape.sum_all(m);
            let n = tape.scalar_value(total);
            (total, n, 0.0)
        }
    }
}

/// Mean loss and gradient over a ray batch. Chunks run in parallel with
/// private tapes and are merged in chunk order, so the result does not
/// depend on the number of threads.
pub fn batch_gradients(
    params: &FieldParams,
    rays: &[Ray],
    depths: &[Vec<f64>],
    targets: &[[f64; 3]],
    render_cfg: &RenderConfig,
    cfg: &TrainConfig,
) -> Result<(StepLoss, Gradients), AutodiffError> {
    let n = rays.len();
    let parts: Vec<Result<(f64, f64, f64, Gradients), AutodiffError>> = (0..n.div_ceil(cfg.chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * cfg.chunk;
            let hi = (lo + cfg.chunk).min(n);
            let mut tape = Tape::new();
            let (root, nll, reg) = record_loss(
                &mut tape,
                params,
                &params.store,
                &rays[lo..hi],
                &depths[lo..hi],
                &targets[lo..hi],
                render_cfg,
                cfg,
            );
            let mut g = Gradients::zeros_like(&params.store);
            tape.backward(root, &mut g)?;
            Ok((tape.scalar_value(root), nll, reg, g))
        })
        .collect();
    let mut grads = Gradients::zeros_like(&params.store);
    let (mut total, mut nll, mut reg) = (0.0, 0.0, 0.0);
    for p in parts {
        let (t, a, r, g) = p?;
        total += t;
        nll += a;
        reg += r;
        grads.add_assign(&g);
    }
    let inv = 1.0 / n as f64;
    grads.scale(inv);
    Ok((
        StepLoss {
            total: total * inv,
            nll: nll * inv,
            reg: reg * inv,
        },
        grads,
    ))
}

/// Field, optimizer and sampling state, kept together so training can be
/// resumed (e.g. across active-learning rounds).
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: FieldParams,
    pub optim: OptimState,
    pub config: TrainConfig,
    pub render: RenderConfig,
    pub iteration: usize,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(field: FieldConfig, config: TrainConfig, render: RenderConfig) -> Result<Self, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = FieldParams::init(field, &mut rng);
        Self::from_params(params, config, render)
    }

    pub fn from_params(params: FieldParams, config: TrainConfig, render: RenderConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            optim: OptimState::new(&params.store),
            params,
            render: RenderConfig {
                samples: config.samples,
                ..render
            },
            config,
            iteration: 0,
            rng,
        })
    }

    /// One optimization step on a random batch from `data`.
    pub fn step(&mut self, data: &TrainingSet) -> Result<StepLoss, TrainError> {
        if data.is_empty() {
            return Err(TrainError::NoData);
        }
        let b = self.config.batch;
        let mut rays = Vec::with_capacity(b);
        let mut targets = Vec::with_capacity(b);
        let mut depths = Vec::with_capacity(b);
        for _ in 0..b {
            let i = self.rng.random_range(0..data.len());
            let ray = data.rays[i];
            depths.push(render::sample_stratified(&ray, self.config.samples, &mut self.rng)?);
            rays.push(ray);
            targets.push(data.targets[i]);
        }
        let iteration = self.iteration;
        let diverged = |source| TrainError::Diverged {
            iteration,
            source,
            last_good: Box::new(self.params.clone()),
        };
        let (loss, grads) = batch_gradients(&self.params, &rays, &depths, &targets, &self.render, &self.config)
            .map_err(diverged)?;
        if !loss.total.is_finite() {
            return Err(diverged(AutodiffError::NonFinite { op: "loss" }));
        }
        let before = self.params.clone();
        adam_step(&mut self.params.store, &grads, &mut self.optim, &self.config, iteration)?;
        if let Err(e) = self.params.store.check_finite() {
            return Err(TrainError::Diverged {
                iteration,
                source: e,
                last_good: Box::new(before),
            });
        }
        self.iteration += 1;
        Ok(loss)
    }

    /// Runs `iterations` steps, appending a trace row every
    /// `eval_interval` steps and after the last one. PSNR is measured on
    /// `eval` when it is non-empty.
    pub fn run(
        &mut self,
        data: &TrainingSet,
        iterations: usize,
        eval: &[View],
        bounds: &Bounds,
        trace: &mut Vec<TraceRow>,
    ) -> Result<(), TrainError> {
        for k in 0..iterations {
            let loss = self.step(data)?;
            let last = k + 1 == iterations;
            let every = self.config.eval_interval;
            if last || (every > 0 && self.iteration % every == 0) {
                let psnr_eval = if eval.is_empty() {
                    None
                } else {
                    Some(mean_psnr(&self.params, eval, bounds, &self.render)?)
                };
                trace.push(TraceRow {
                    iteration: self.iteration,
                    total: loss.total,
                    nll: loss.nll,
                    reg: loss.reg,
                    psnr_eval,
                });
            }
        }
        Ok(())
    }
}

/// Trains a fresh field on `views` for `config.iterations` steps.
pub fn train(
    views: &[View],
    eval: &[View],
    bounds: &Bounds,
    field: FieldConfig,
    config: TrainConfig,
    render: RenderConfig,
) -> Result<(FieldParams, Vec<TraceRow>), TrainError> {
    let data = TrainingSet::from_views(views, bounds);
    let mut trainer = Trainer::new(field, config, render)?;
    let mut trace = Vec::new();
    if config.iterations > 0 {
        if data.is_empty() {
            return Err(TrainError::NoData);
        }
        trainer.run(&data, config.iterations, eval, bounds, &mut trace)?;
    }
    Ok((trainer.params, trace))
}

/// A rendered camera with per-pixel uncertainty maps.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub color: Image,
    pub aleatoric: ScalarMap,
    pub epistemic: ScalarMap,
    pub total: ScalarMap,
    pub nig: Vec<RgbNig>,
    /// Gaussian reading of each pixel (mean color, aleatoric variance).
    pub normal: Vec<NormalPixel>,
    /// Pixels rendered from the field; the rest missed the bounds or carried
    /// no weight and hold the background fallback.
    pub rendered: Mask,
}

/// Renders `camera` with bin-midpoint samples.
pub fn render_camera(
    params: &FieldParams,
    camera: &Camera,
    bounds: &Bounds,
    cfg: &RenderConfig,
) -> Result<RenderedView, RenderError> {
    render_camera_with(params, camera, bounds, cfg, |_| {})
}

/// As [`render_camera`], passing every point through `adjust` first.
pub fn render_camera_with(
    params: &FieldParams,
    camera: &Camera,
    bounds: &Bounds,
    cfg: &RenderConfig,
    adjust: impl Fn(&mut PointPrediction) + Sync,
) -> Result<RenderedView, RenderError> {
    let rays = camera.rays(bounds);
    let hit: Vec<Ray> = rays.iter().flatten().copied().collect();
    let pixels = render::render_rays_with(params, &hit, cfg, Sampling::Midpoint, adjust)?;
    let miss = render::composite(&[], &[], cfg)?;
    let mut it = pixels.into_iter();
    let all: Vec<_> = rays
        .iter()
        .map(|r| match r {
            Some(_) => it.next().expect("one pixel per ray"),
            None => miss,
        })
        .collect();
    let (w, h) = (camera.width, camera.height);
    let map = |f: fn(&render::PixelEvidential) -> f64| ScalarMap::from_values(w, h, all.iter().map(f).collect());
    Ok(RenderedView {
        color: Image::from_pixels(w, h, all.iter().map(|p| p.mean_color).collect()),
        aleatoric: map(|p| p.aleatoric),
        epistemic: map(|p| p.epistemic),
        total: map(|p| p.total),
        nig: all.iter().map(|p| p.nig()).collect(),
        normal: all
            .iter()
            .map(|p| NormalPixel {
                mu: p.mean_color,
                sigma2: p.aleatoric.max(cfg.eps_u),
            })
            .collect(),
        rendered: all.iter().map(|p| !p.empty).collect(),
    })
}

/// Mean PSNR of the field's renders against the clean images of `views`.
pub fn mean_psnr(params: &FieldParams, views: &[View], bounds: &Bounds, cfg: &RenderConfig) -> Result<f64, RenderError> {
    let mut s = 0.0;
    for v in views {
        let r = render_camera(params, &v.camera, bounds, cfg)?;
        s += metrics::psnr(&r.color, &v.clean).min(metrics::PSNR_CAP);
    }
    Ok(s / views.len() as f64)
}

/// Quality and uncertainty metrics of the field's renders of `views`
/// against their clean images, averaged over views. Sparsification uses the
/// total variance for the evidential objective and the aleatoric variance
/// for the normal one; the vanilla objective has no NLL or AUSE.
pub fn evaluate(
    params: &FieldParams,
    views: &[View],
    bounds: &Bounds,
    cfg: &RenderConfig,
    objective: Objective,
    scene: &str,
) -> Result<metrics::MetricsRow, TrainError> {
    if views.is_empty() {
        return Err(TrainError::NoData);
    }
    let grid = metrics::default_fraction_grid();
    let (mut psnr, mut ssim, mut nll, mut a_rmse, mut a_mae) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for v in views {
        let r = render_camera(params, &v.camera, bounds, cfg)?;
        psnr += metrics::psnr(&r.color, &v.clean).min(metrics::PSNR_CAP);
        ssim += metrics::ssim(&r.color, &v.clean);
        let unc = match objective {
            Objective::Evidential => {
                nll += metrics::nll_metric(&v.clean, &r.nig)?;
                &r.total.values
            }
            Objective::Normal => {
                nll += metrics::gaussian_nll_metric(&v.clean, &r.normal);
                &r.aleatoric.values
            }
            Objective::Vanilla => continue,
        };
        for (kind, acc) in [(metrics::ErrorKind::Rmse, &mut a_rmse), (metrics::ErrorKind::Mae, &mut a_mae)] {
            let err = metrics::pixel_errors(&r.color.pixels, &v.clean.pixels, kind);
            *acc += metrics::ause(unc, &err, kind, &grid);
        }
    }
    let n = views.len() as f64;
    let probabilistic = objective != Objective::Vanilla;
    let opt = |x: f64| probabilistic.then_some(x / n);
    Ok(metrics::MetricsRow {
        scene: scene.to_string(),
        method: objective.name().to_string(),
        psnr: psnr / n,
        ssim: ssim / n,
        nll: opt(nll),
        ause_rmse: opt(a_rmse),
        ause_mae: opt(a_mae),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_views, CameraRing, SceneSpec};
    use ndarray::array;

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut store = ParamStore::new();
        let id = store.insert("p", array![[1.0, -2.0]]);
        let g = Gradients::zeros_like(&store);
        let mut st = OptimState::new(&store);
        adam_step(&mut store, &g, &mut st, &TrainConfig::default(), 0).unwrap();
        assert_eq!(store.value(id), &array![[1.0, -2.0]]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.insert("p", array![[1.0, -2.0, 0.5]]);
        let mut g = Gradients::zeros_like(&store);
        g.arrays[0] = array![[3.0, -0.2, 40.0]];
        let mut st = OptimState::new(&store);
        let cfg = TrainConfig::default();
        adam_step(&mut store, &g, &mut st, &cfg, 0).unwrap();
        let moved = store.value(id) - &array![[1.0, -2.0, 0.5]];
        for (d, gs) in moved.iter().zip(g.arrays[0].iter()) {
            assert!((d.abs() - cfg.lr).abs() < 1e-9 * cfg.lr.max(1.0) + 1e-10);
            assert!(d.signum() == -gs.signum());
        }
    }

    #[test]
    fn adam_rejects_nan_with_name() {
        let mut store = ParamStore::new();
        store.insert("a", array![[1.0]]);
        store.insert("b.weight", array![[1.0]]);
        let mut g = Gradients::zeros_like(&store);
        g.arrays[1][[0, 0]] = f64::NAN;
        let mut st = OptimState::new(&store);
        match adam_step(&mut store, &g, &mut st, &TrainConfig::default(), 17) {
            Err(TrainError::NonFiniteGradient { iteration, param }) => {
                assert_eq!((iteration, param.as_str()), (17, "b.weight"));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(st.step, 0);
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        let mut store = ParamStore::new();
        let id = store.insert("p", array![[1.5, -0.7, 0.3, 2.0]]);
        let center = array![[0.2, 0.1, -0.4, 1.0]];
        let cfg = TrainConfig {
            lr: 1e-2,
            ..TrainConfig::default()
        };
        let mut st = OptimState::new(&store);
        let mut loss = f64::INFINITY;
        for it in 0..2000 {
            let d = store.value(id) - &center;
            loss = d.mapv(|x| x * x).sum();
            if loss < 1e-6 {
                break;
            }
            let mut g = Gradients::zeros_like(&store);
            g.arrays[0] = d.mapv(|x| 2.0 * x);
            adam_step(&mut store, &g, &mut st, &cfg, it).unwrap();
        }
        assert!(loss < 1e-6, "{loss}");
    }

    fn tiny_setup() -> (SceneSpec, Vec<View>) {
        let scene = SceneSpec::default();
        let views = generate_views(&scene, &CameraRing::full(8, 8), 3, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .views;
        (scene, views)
    }

    fn tiny_field() -> FieldConfig {
        FieldConfig {
            l_pos: 3,
            l_dir: 1,
            width: 16,
            depth: 2,
            eps_u: 1e-6,
        }
    }

    fn tiny_train(objective: Objective, iterations: usize, chunk: usize) -> TrainConfig {
        TrainConfig {
            objective,
            iterations,
            batch: 32,
            samples: 12,
            seed: 5,
            eval_interval: 5,
            chunk,
            lr: 5e-3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_initial_params() {
        let (scene, views) = tiny_setup();
        let cfg = tiny_train(Objective::Evidential, 0, 8);
        let (p, trace) = train(&views, &[], &scene.bounds, tiny_field(), cfg, RenderConfig::default()).unwrap();
        let init = FieldParams::init(tiny_field(), &mut ChaCha8Rng::seed_from_u64(cfg.seed));
        assert_eq!(p, init);
        assert!(trace.is_empty());
    }

    #[test]
    fn training_is_reproducible_and_thread_independent() {
        let (scene, views) = tiny_setup();
        let run = |chunk| {
            let cfg = tiny_train(Objective::Evidential, 10, chunk);
            train(&views, &views[..1], &scene.bounds, tiny_field(), cfg, RenderConfig::default()).unwrap()
        };
        let (a, ta) = run(8);
        let (b, tb) = run(8);
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.len(), 2);
        assert!(ta.iter().all(|r| r.total.is_finite() && r.psnr_eval.is_some()));
        // one worker thread gives the same bits
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (c, _) = pool.install(|| run(8));
        assert_eq!(a, c);
    }

    #[test]
    fn every_objective_reduces_its_loss() {
        let (scene, views) = tiny_setup();
        for obj in [Objective::Evidential, Objective::Normal, Objective::Vanilla] {
            let cfg = TrainConfig {
                eval_interval: 1,
                ..tiny_train(obj, 60, 16)
            };
            let (_, trace) = train(&views, &[], &scene.bounds, tiny_field(), cfg, RenderConfig::default()).unwrap();
            let head: f64 = trace[..10].iter().map(|r| r.total).sum::<f64>() / 10.0;
            let tail: f64 = trace[50..].iter().map(|r| r.total).sum::<f64>() / 10.0;
            assert!(tail < head, "{obj:?}: {head} -> {tail}");
        }
    }

    #[test]
    fn trace_csv_format() {
        let rows = [
            TraceRow {
                iteration: 5,
                total: 1.5,
                nll: 1.25,
                reg: 25.0,
                psnr_eval: None,
            },
            TraceRow {
                iteration: 10,
                total: 1.0,
                nll: 0.75,
                reg: 25.0,
                psnr_eval: Some(f64::INFINITY),
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,total,nll,reg,psnr_eval\n5,1.5,1.25,25.0,\n10,1.0,0.75,25.0,99.0\n"
        );
    }

    #[test]
    fn camera_render_fills_misses_with_fallback() {
        let (scene, views) = tiny_setup();
        let p = FieldParams::init(tiny_field(), &mut ChaCha8Rng::seed_from_u64(1));
        let mut cam = views[0].camera;
        // wide field of view so corner rays miss the bounds
        cam.focal = 2.0;
        let cfg = RenderConfig {
            samples: 8,
            ..RenderConfig::default()
        };
        let r = render_camera(&p, &cam, &scene.bounds, &cfg).unwrap();
        assert!(r.rendered.iter().any(|&b| !b));
        assert!(r.rendered.iter().any(|&b| b));
        for (i, &ok) in r.rendered.iter().enumerate() {
            if !ok {
                assert_eq!(r.color.pixels[i], cfg.background);
                assert_eq!(r.epistemic.values[i], cfg.eu_max);
            }
        }
    }
}

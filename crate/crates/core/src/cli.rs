//! Command-line front end: run configuration, subcommands and output files.
//!
//! Settings come from built-in defaults, then an optional TOML run file
//! (`--config`), then command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::{self, ActiveLearnConfig, AppError, CleaningConfig, Strategy};
use crate::checks;
use crate::field::{self, FieldConfig, FieldError, FieldParams};
use crate::image::ScalarMap;
use crate::io::{self, IoError};
use crate::metrics::{self, MetricsRow};
use crate::render::{RenderConfig, RenderError};
use crate::scene::{Dataset, DatasetConfig, SceneError, SceneSpec, View};
use crate::train::{self, render_camera, Objective, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    App(#[from] AppError),
    #[error(transparent)]
    Output(#[from] IoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{failed} of {total} oracle suites failed")]
    OracleFailed { failed: usize, total: usize },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub samples: usize,
    /// Epistemic uncertainty reported for rays that carry no weight.
    pub eu_max: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        let d = RenderConfig::default();
        Self {
            samples: d.samples,
            eu_max: d.eu_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanSection {
    /// AU thresholds to sweep, from loose to strict.
    pub thresholds: Vec<f64>,
    pub attenuation: f64,
}

impl Default for CleanSection {
    fn default() -> Self {
        Self {
            thresholds: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            attenuation: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActiveSection {
    /// Candidate views on the training ring.
    pub pool_views: usize,
    pub initial_views: usize,
    pub rounds: usize,
    pub views_per_round: usize,
    pub epochs_per_round: usize,
    pub score_downscale: usize,
}

impl Default for ActiveSection {
    fn default() -> Self {
        let d = ActiveLearnConfig::default();
        Self {
            pool_views: 30,
            initial_views: d.initial_views,
            rounds: d.rounds,
            views_per_round: d.views_per_round,
            epochs_per_round: d.epochs_per_round,
            score_downscale: d.score_downscale,
        }
    }
}

impl ActiveSection {
    pub fn learn_config(&self, strategy: Strategy) -> ActiveLearnConfig {
        ActiveLearnConfig {
            initial_views: self.initial_views,
            rounds: self.rounds,
            views_per_round: self.views_per_round,
            epochs_per_round: self.epochs_per_round,
            strategy,
            score_downscale: self.score_downscale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
        }
    }
}

/// Everything a command needs, as read from a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Scene file; the built-in scene when absent. Relative paths are
    /// resolved against the run file's directory.
    pub scene: Option<PathBuf>,
    /// Label written to the `scene` column of metric tables.
    pub name: String,
    pub output: PathBuf,
    pub data: DatasetConfig,
    pub field: FieldConfig,
    pub train: TrainConfig,
    pub render: RenderSection,
    pub clean: CleanSection,
    pub active: ActiveSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: None,
            name: "default".into(),
            output: PathBuf::from("out"),
            data: DatasetConfig::default(),
            field: FieldConfig::default(),
            train: TrainConfig::default(),
            render: RenderSection::default(),
            clean: CleanSection::default(),
            active: ActiveSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        if let Some(scene) = &cfg.scene {
            if scene.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.scene = Some(dir.join(scene));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(file_err(path))?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = &self.scene {
            if !s.is_file() {
                return Err(CliError::Config(format!("scene file {} does not exist", s.display())));
            }
        }
        self.train.validate()?;
        if self.field.width == 0 || self.field.depth == 0 {
            return Err(CliError::Config("field width and depth must be >= 1".into()));
        }
        if self.render.samples == 0 {
            return Err(CliError::Config("render.samples must be >= 1".into()));
        }
        CleaningConfig::new(1.0, self.clean.attenuation)?;
        if self.clean.thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(CliError::Config("clean.thresholds must be positive".into()));
        }
        if self.sweep.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(CliError::Config("sweep.lambdas must be >= 0".into()));
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<SceneSpec, CliError> {
        Ok(match &self.scene {
            Some(p) => SceneSpec::load(p)?,
            None => SceneSpec::default(),
        })
    }

    pub fn render_config(&self, scene: &SceneSpec) -> RenderConfig {
        RenderConfig {
            samples: self.render.samples,
            background: scene.background,
            eu_max: self.render.eu_max,
            eps_u: self.field.eps_u,
            ..RenderConfig::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evnerf", version, about = "Evidential radiance fields on synthetic scenes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a field and write a checkpoint and loss trace.
    Train(TrainArgs),
    /// Render the test views: color PNG plus AU, EU, total and error maps.
    Render(RenderArgs),
    /// Write image-quality and uncertainty metrics for the test views.
    Eval(EvalArgs),
    /// Render the test views with high-AU points attenuated, across a threshold sweep.
    Clean(CleanArgs),
    /// Compare EU-driven and random view selection.
    Active(ActiveArgs),
    /// Train once per regularization coefficient and tabulate metrics.
    SweepLambda(SweepArgs),
    /// Run every closed-form and gradient self-check.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the run file).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "lambda")]
    pub lambda_reg: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Render only this test view.
    #[arg(long)]
    pub view: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Checkpoint to evaluate; without it the ground-truth renders are
    /// scored against themselves.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Which uncertainty the checkpoint was trained to predict.
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated AU thresholds (overrides the run file).
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ActiveArgs {
    #[command(flatten)]
    pub common: Common,
    /// One run per seed and strategy; repeat or comma-separate.
    #[arg(long, required = true, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Strategies to run (default: both).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated coefficients (overrides the run file).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smaller sample counts, for a fast smoke run.
    #[arg(long)]
    pub quick: bool,
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.output {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(file_err(dir))
}

fn create_file(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(file_err(path))
}

/// Loaded run file, scene, dataset and render settings.
struct Context {
    cfg: RunConfig,
    scene: SceneSpec,
    data: Dataset,
    render: RenderConfig,
}

impl Context {
    fn new(cfg: RunConfig) -> Result<Self, CliError> {
        cfg.validate()?;
        let scene = cfg.scene()?;
        let data = cfg.data.build(&scene)?;
        let render = cfg.render_config(&scene);
        create_dir(&cfg.output)?;
        Ok(Self {
            cfg,
            scene,
            data,
            render,
        })
    }
}

fn load_field(path: &Path) -> Result<FieldParams, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("checkpoint {} does not exist", path.display())));
    }
    Ok(field::load_checkpoint(path)?)
}

fn train_field(ctx: &Context, train_cfg: TrainConfig) -> Result<(FieldParams, Vec<train::TraceRow>), CliError> {
    let out = train::train(
        &ctx.data.train.views,
        &ctx.data.test.views,
        &ctx.scene.bounds,
        ctx.cfg.field,
        train_cfg,
        ctx.render,
    );
    match out {
        Err(TrainError::Diverged {
            iteration,
            source,
            last_good,
        }) => {
            let path = ctx.cfg.output.join("last_good.evf");
            field::save_checkpoint(&last_good, &path)?;
            eprintln!("parameters before the failing step saved to {}", path.display());
            Err(TrainError::Diverged {
                iteration,
                source,
                last_good,
            }
            .into())
        }
        r => Ok(r?),
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    cfg.train.seed = args.seed;
    if let Some(o) = args.objective {
        cfg.train.objective = o;
    }
    if let Some(n) = args.iterations {
        cfg.train.iterations = n;
    }
    if let Some(l) = args.lambda_reg {
        cfg.train.lambda_reg = l;
    }
    let ctx = Context::new(cfg)?;
    let (params, trace) = train_field(&ctx, ctx.cfg.train)?;
    let ckpt = ctx.cfg.output.join("checkpoint.evf");
    field::save_checkpoint(&params, &ckpt)?;
    let trace_path = ctx.cfg.output.join("trace.csv");
    train::write_trace_csv(create_file(&trace_path)?, &trace)?;
    if let Some(psnr) = trace.last().and_then(|r| r.psnr_eval) {
        println!("test PSNR {psnr:.2} dB");
    }
    println!("wrote {} and {}", ckpt.display(), trace_path.display());
    Ok(())
}

/// Per-pixel RMSE over the channels.
fn error_map(pred: &crate::image::Image, gt: &crate::image::Image) -> ScalarMap {
    let e = metrics::pixel_errors(&pred.pixels, &gt.pixels, metrics::ErrorKind::Rmse);
    ScalarMap::from_values(pred.width, pred.height, e)
}

fn selected_views(views: &[View], only: Option<usize>) -> Result<Vec<(usize, &View)>, CliError> {
    match only {
        Some(k) if k >= views.len() => Err(CliError::Config(format!(
            "view {k} out of range ({} test views)",
            views.len()
        ))),
        Some(k) => Ok(vec![(k, &views[k])]),
        None => Ok(views.iter().enumerate().collect()),
    }
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let ctx = Context::new(load_config(&args.common)?)?;
    let params = load_field(&args.checkpoint)?;
    let dir = ctx.cfg.output.join("render");
    create_dir(&dir)?;
    for (k, v) in selected_views(&ctx.data.test.views, args.view)? {
        let r = render_camera(&params, &v.camera, &ctx.scene.bounds, &ctx.render)?;
        io::write_png(&r.color, dir.join(format!("view{k:02}.png")))?;
        let err = error_map(&r.color, &v.clean);
        for (tag, map) in [("au", &r.aleatoric), ("eu", &r.epistemic), ("u", &r.total), ("error", &err)] {
            io::write_pfm(map, dir.join(format!("view{k:02}_{tag}.pfm")))?;
            io::write_colormap_png(map, dir.join(format!("view{k:02}_{tag}.png")))?;
        }
    }
    println!("wrote renders to {}", dir.display());
    Ok(())
}

fn reference_row(ctx: &Context) -> MetricsRow {
    let views = &ctx.data.test.views;
    let n = views.len() as f64;
    let (mut psnr, mut ssim) = (0.0, 0.0);
    for v in views {
        psnr += metrics::psnr(&v.clean, &v.clean).min(metrics::PSNR_CAP);
        ssim += metrics::ssim(&v.clean, &v.clean);
    }
    MetricsRow {
        scene: ctx.cfg.name.clone(),
        method: "reference".into(),
        psnr: psnr / n,
        ssim: ssim / n,
        nll: None,
        ause_rmse: None,
        ause_mae: None,
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let ctx = Context::new(load_config(&args.common)?)?;
    let row = match &args.checkpoint {
        Some(p) => {
            let params = load_field(p)?;
            let objective = args.objective.unwrap_or(ctx.cfg.train.objective);
            train::evaluate(
                &params,
                &ctx.data.test.views,
                &ctx.scene.bounds,
                &ctx.render,
                objective,
                &ctx.cfg.name,
            )?
        }
        None => reference_row(&ctx),
    };
    let path = ctx.cfg.output.join("metrics.csv");
    metrics::write_metrics_csv(create_file(&path)?, std::slice::from_ref(&row))?;
    println!(
        "PSNR {:.2} dB, SSIM {:.4}; wrote {}",
        row.psnr.min(metrics::PSNR_CAP),
        row.ssim,
        path.display()
    );
    Ok(())
}

fn cmd_clean(args: CleanArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(t) = args.thresholds {
        cfg.clean.thresholds = t;
    }
    let ctx = Context::new(cfg)?;
    let params = load_field(&args.checkpoint)?;
    let dir = ctx.cfg.output.join("clean");
    create_dir(&dir)?;
    let mut table = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create_file(&ctx.cfg.output.join("clean.csv"))?);
    table.write_record(["threshold", "mse", "psnr"])?;
    let sweep = std::iter::once(f64::INFINITY).chain(ctx.cfg.clean.thresholds.iter().copied());
    for tau in sweep {
        let cc = CleaningConfig::new(tau, ctx.cfg.clean.attenuation)?;
        let mut mse = 0.0;
        for (k, v) in ctx.data.test.views.iter().enumerate() {
            let r = apps::clean_render(&params, &v.camera, &ctx.scene.bounds, &ctx.render, &cc)?;
            mse += metrics::image_mse(&r.color, &v.clean);
            io::write_png(&r.color, dir.join(format!("tau_{tau}_view{k:02}.png")))?;
        }
        mse /= ctx.data.test.len() as f64;
        let psnr = metrics::psnr_from_mse(mse).min(metrics::PSNR_CAP);
        table.write_record([tau.to_string(), mse.to_string(), psnr.to_string()])?;
        println!("threshold {tau:>8}: MSE {mse:.6} PSNR {psnr:.2} dB");
    }
    table.flush().map_err(file_err(&ctx.cfg.output))?;
    Ok(())
}

fn cmd_active(args: ActiveArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    cfg.data.train_views = cfg.active.pool_views;
    let ctx = Context::new(cfg)?;
    let strategies = if args.strategy.is_empty() {
        vec![Strategy::Eu, Strategy::Random]
    } else {
        args.strategy
    };
    let mut rows = Vec::new();
    for &seed in &args.seed {
        for &s in &strategies {
            let run = apps::active_learn(
                &ctx.data.train.views,
                &ctx.data.test.views,
                &ctx.scene.bounds,
                ctx.cfg.field,
                ctx.cfg.train,
                ctx.render,
                &ctx.cfg.active.learn_config(s),
                seed,
            )?;
            for r in &run.rows {
                println!("seed {seed} {:>6} round {} views {:>2}: PSNR {:.2} dB", r.strategy, r.round, r.n_views, r.psnr);
            }
            rows.extend(run.rows);
        }
    }
    let path = ctx.cfg.output.join("active.csv");
    apps::write_active_csv(create_file(&path)?, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(l) = args.lambdas {
        cfg.sweep.lambdas = l;
    }
    cfg.train.seed = args.seed;
    cfg.train.objective = Objective::Evidential;
    let ctx = Context::new(cfg)?;
    let mut rows = Vec::new();
    for &lambda in &ctx.cfg.sweep.lambdas {
        let tc = TrainConfig {
            lambda_reg: lambda,
            ..ctx.cfg.train
        };
        let (params, _) = train_field(&ctx, tc)?;
        let mut row = train::evaluate(
            &params,
            &ctx.data.test.views,
            &ctx.scene.bounds,
            &ctx.render,
            Objective::Evidential,
            &ctx.cfg.name,
        )?;
        row.method = format!("evidential-lambda-{lambda}");
        println!("lambda {lambda}: PSNR {:.2} dB", row.psnr);
        rows.push(row);
    }
    let path = ctx.cfg.output.join("sweep.csv");
    metrics::write_metrics_csv(create_file(&path)?, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), CliError> {
    let reports = if args.quick {
        vec![
            checks::gradient_suite(args.seed),
            checks::propagation_suite(args.seed, 4, 200_000),
            checks::marginal_suite(args.seed, 2),
            checks::gaussian_limit_suite(args.seed),
            checks::ause_suite(),
        ]
    } else {
        checks::run_all(args.seed)
    };
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::OracleFailed {
            failed,
            total: reports.len(),
        });
    }
    println!("all {} suites passed", reports.len());
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Render(a) => cmd_render(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Clean(a) => cmd_clean(a),
        Command::Active(a) => cmd_active(a),
        Command::SweepLambda(a) => cmd_sweep(a),
        Command::OracleCheck(a) => cmd_oracle(a),
    }
}

/// Parses `args` (program name first) and runs the command, printing any
/// error to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("bogus = 1\n", Path::new("run.toml"));
        assert!(matches!(e, Err(CliError::Parse { .. })));
        let e = RunConfig::from_toml("[train]\nlr = 1e-3\nmomentum = 0.9\n", Path::new("run.toml"));
        assert!(matches!(e, Err(CliError::Parse { .. })));
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = RunConfig::from_toml(
            "output = \"x\"\n[train]\nlr = 1e-3\n[data]\nnoise_sigma = 0.1\nnoise_region = { kind = \"left-half\" }\n",
            Path::new("cfgs/run.toml"),
        )
        .unwrap();
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.train.batch, TrainConfig::default().batch);
        assert_eq!(cfg.data.noise_region, crate::scene::NoiseRegion::LeftHalf);
        assert_eq!(cfg.field, FieldConfig::default());
    }

    #[test]
    fn relative_scene_path_follows_run_file() {
        let cfg = RunConfig::from_toml("scene = \"s.toml\"\n", Path::new("cfgs/run.toml")).unwrap();
        assert_eq!(cfg.scene, Some(PathBuf::from("cfgs/s.toml")));
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn seed_is_required_for_train_and_active() {
        assert!(Cli::try_parse_from(["evnerf", "train"]).is_err());
        assert!(Cli::try_parse_from(["evnerf", "active"]).is_err());
        assert!(Cli::try_parse_from(["evnerf", "train", "--seed", "3"]).is_ok());
        let c = Cli::try_parse_from(["evnerf", "active", "--seed", "1,2", "--strategy", "random"]).unwrap();
        let Command::Active(a) = c.command else { panic!() };
        assert_eq!(a.seed, [1, 2]);
        assert_eq!(a.strategy, [Strategy::Random]);
    }

    #[test]
    fn default_config_round_trips() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_toml(&text, Path::new("run.toml")).unwrap(), RunConfig::default());
    }
}

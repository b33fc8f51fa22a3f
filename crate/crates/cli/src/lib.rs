//! The `alseg` command line: scene generation, scoring, batch selection,
//! active-learning simulation and evaluation.
//!
//! Errors are printed to stderr as `alseg: error[<kind>]: <message>`, where
//! `<kind>` is one of the names returned by [`error_kind`].

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use alseg::io::{self, Matrix, MatrixData, RunConfig, SceneSpec};
use alseg::metrics::{compare_strategies, confusion, miou, ComparisonTable, MeanIou};
use alseg::selection::{fds_select, rank_candidates, top_k_select, SelectionConfig, Strategy, Suppression};
use alseg::trainer::{active_loop_eval, strategy_scores, HoldOut, IterationReport, TrainingScene};
use alseg::uncertainty::ContextMode;
use alseg::{Error, FeatureField, PointCloud, ProbabilityField, SelectionState};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "alseg", version, about = "Point-based active learning for point-cloud segmentation")]
pub struct Cli {
    /// Worker threads for simulate (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a labeled synthetic room scene as PLY
    Gen(GenArgs),
    /// Score every point of a cloud from a probability matrix
    Score(ScoreArgs),
    /// Pick an annotation batch from precomputed scores and features
    Select(SelectArgs),
    /// Run the active-learning loop per strategy and seed
    Simulate(SimulateArgs),
    /// Compare predictions with the ground truth of a cloud
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 50_000)]
    pub points: usize,
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of points scattered in the air with random labels
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
    /// Gaussian offset off the surfaces, meters
    #[arg(long)]
    pub surface_noise: Option<f64>,
    #[arg(long)]
    pub color_noise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flag-level overrides; these beat the config file, which beats the
/// built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<String>,
    /// FDS radius in meters
    #[arg(long)]
    pub fds_radius: Option<f64>,
    /// FDS similarity threshold
    #[arg(long)]
    pub tau: Option<f64>,
    /// `exact` or `voxel`
    #[arg(long)]
    pub context_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub initial_fraction: Option<f64>,
    #[arg(long)]
    pub per_iter_fraction: Option<f64>,
    #[arg(long)]
    pub pseudo_threshold: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    /// N x C probability matrix
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    /// N x 1 score matrix
    #[arg(long)]
    pub scores: PathBuf,
    /// N x D feature matrix
    #[arg(long)]
    pub features: PathBuf,
    /// Selection list of points that already carry labels
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub k: i64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Labeled cloud to run on
    #[arg(long)]
    pub cloud: PathBuf,
    /// Comma-separated strategy names
    #[arg(long, value_delimiter = ',', default_value = "random,mmu,hmmu,hmmu_fds")]
    pub strategies: Vec<String>,
    /// Number of trainer seeds, counting up from the configured seed
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Labeled cloud to report mIoU on instead of the training cloud
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// N x 1 class ids or N x C probabilities
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Stable machine-readable category of an error.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    if err.downcast_ref::<clap::Error>().is_some() {
        return "usage";
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidArgument(_) => "invalid-argument",
                Error::DimensionMismatch { .. } => "dimension-mismatch",
                Error::IndexOutOfRange { .. } => "index-out-of-range",
                Error::AlreadyLabeled(_) => "already-labeled",
                Error::MissingLabels => "missing-labels",
                Error::Ply { .. } => "ply",
                Error::Matrix(_) => "matrix",
                Error::Config(_) => "config",
                Error::InfeasibleSpec(_) => "infeasible-spec",
                Error::Io(_) => "io",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "internal"
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Score(a) => cmd_score(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Simulate(a) => cmd_simulate(&a, cli.threads),
        Command::Eval(a) => cmd_eval(&a),
    }
}

/// Defaults, then the config file, then flags; the result is validated as a
/// whole.
pub fn effective_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => io::load_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = &o.strategy {
        cfg.selection.strategy = Strategy::from_str(s)?;
    }
    if let Some(m) = &o.context_mode {
        cfg.scoring.context_mode = match m.as_str() {
            "exact" => ContextMode::Exact,
            "voxel" => ContextMode::Voxel,
            other => return Err(Error::Config(format!("context_mode: unknown mode {other:?}; use exact or voxel")).into()),
        };
    }
    let t = &mut cfg.trainer;
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.selection.radius, o.fds_radius);
    set(&mut cfg.selection.tau, o.tau);
    set(&mut t.initial_fraction, o.initial_fraction);
    set(&mut t.per_iter_fraction, o.per_iter_fraction);
    set(&mut t.pseudo_threshold, o.pseudo_threshold);
    set(&mut t.alpha, o.alpha);
    set(&mut t.learning_rate, o.learning_rate);
    if let Some(v) = o.seed {
        t.seed = v;
    }
    if let Some(v) = o.iterations {
        t.iterations = v;
    }
    if let Some(v) = o.steps {
        t.steps = v;
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    })?;
    eprintln!("effective config: {}", cfg.to_json());
    Ok(cfg)
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    io::load_ply(path).with_context(|| format!("reading {}", path.display()))
}

fn load_matrix(path: &Path) -> Result<Matrix> {
    io::load_matrix(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn check_rows(what: &'static str, m: &Matrix, n: usize) -> Result<()> {
    if m.rows != n {
        return Err(Error::DimensionMismatch { what, expected: n, got: m.rows }.into());
    }
    Ok(())
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let mut spec = SceneSpec {
        n_points: a.points,
        n_classes: a.classes,
        seed: a.seed,
        ..SceneSpec::default()
    };
    if let Some(v) = a.outlier_fraction {
        spec.outlier_fraction = v;
    }
    if let Some(v) = a.surface_noise {
        spec.surface_noise = v;
    }
    if let Some(v) = a.color_noise {
        spec.color_noise = v;
    }
    let cloud = io::gen_synthetic(&spec)?;
    io::save_ply(&cloud, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut counts = vec![0usize; a.classes];
    for &l in cloud.labels()? {
        counts[l as usize] += 1;
    }
    println!("wrote {} points to {}", cloud.len(), a.out.display());
    for (c, n) in counts.iter().enumerate() {
        println!("class {c}: {n}");
    }
    Ok(())
}

pub fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let cfg = effective_config(&a.overrides)?;
    let cloud = load_cloud(&a.cloud)?;
    let m = load_matrix(&a.probs)?;
    check_rows("probability rows vs cloud points", &m, cloud.len())?;
    let probs = ProbabilityField::new(m.to_f64(), m.cols)?;
    let scores = strategy_scores(cfg.selection.strategy, &cloud, &probs, &cfg.scoring, cfg.trainer.seed)?;
    io::save_matrix(&Matrix::from_f64(scores.len(), 1, &scores)?, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ScoredPoint {
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct SelectReport {
    pub strategy: Strategy,
    pub k: usize,
    pub fds_radius_m: f64,
    pub tau: f64,
    pub selected: Vec<ScoredPoint>,
    pub suppressed: Vec<Suppression>,
    pub exhausted: bool,
}

pub fn cmd_select(a: &SelectArgs) -> Result<()> {
    if a.k < 0 {
        return Err(Error::InvalidArgument(format!("k must be non-negative, got {}", a.k)).into());
    }
    let k = a.k as usize;
    let cfg = effective_config(&a.overrides)?;
    let cloud = load_cloud(&a.cloud)?;
    let n = cloud.len();
    let scores = load_matrix(&a.scores)?;
    check_rows("score rows vs cloud points", &scores, n)?;
    if scores.cols != 1 {
        return Err(Error::DimensionMismatch { what: "score columns", expected: 1, got: scores.cols }.into());
    }
    let scores = scores.to_f64();
    let feats = load_matrix(&a.features)?;
    check_rows("feature rows vs cloud points", &feats, n)?;
    let feats = FeatureField::new(feats.to_f64(), feats.cols)?;
    let labeled = match &a.labeled {
        Some(path) => io::load_selection(path).with_context(|| format!("reading {}", path.display()))?,
        None => Vec::new(),
    };
    let state = SelectionState::new(n, labeled)?;

    let strategy = cfg.selection.strategy;
    let ranked = rank_candidates(&scores, &state.unlabeled(), strategy.direction());
    let result = if strategy.uses_fds() {
        fds_select(&ranked, &cloud, &feats, &SelectionConfig { budget_k: k, ..cfg.selection })?
    } else {
        top_k_select(&ranked, k)
    };
    io::save_selection(&result.selected, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.report {
        let report = SelectReport {
            strategy,
            k,
            fds_radius_m: cfg.selection.radius,
            tau: cfg.selection.tau,
            selected: result.selected.iter().map(|&index| ScoredPoint { index, score: scores[index] }).collect(),
            suppressed: result.suppressed,
            exhausted: result.exhausted,
        };
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Run {
    pub strategy: Strategy,
    pub seed: u64,
    pub iterations: Vec<IterationReport>,
}

#[derive(Debug, Serialize)]
pub struct SimulateResults {
    pub config: serde_json::Value,
    pub n_points: usize,
    pub holdout_points: Option<usize>,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub runs: Vec<Run>,
    pub comparison: ComparisonTable,
}

pub fn simulate(
    cloud: PointCloud,
    holdout: Option<&PointCloud>,
    cfg: &RunConfig,
    strategies: &[Strategy],
    seeds: &[u64],
    threads: usize,
) -> Result<SimulateResults> {
    if strategies.is_empty() || seeds.is_empty() {
        bail!(Error::InvalidArgument("simulate needs at least one strategy and one seed".into()));
    }
    cloud.labels()?;
    let n_points = cloud.len();
    let scene = TrainingScene::new(cloud, cfg.trainer.feature_radius)?;
    let holdout = holdout.map(|h| HoldOut::new(&scene, h)).transpose()?;
    let cells: Vec<(Strategy, u64)> = strategies
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let runs: Vec<Run> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(strategy, seed)| {
                let trainer = alseg::trainer::TrainerConfig { seed, ..cfg.trainer.clone() };
                let sel = SelectionConfig { strategy, ..cfg.selection };
                let iterations = active_loop_eval(&scene, holdout.as_ref(), &trainer, &sel, &cfg.scoring)?;
                Ok(Run { strategy, seed, iterations })
            })
            .collect::<alseg::Result<Vec<Run>>>()
    })?;
    let curves: Vec<(String, Vec<Vec<f64>>)> = strategies
        .iter()
        .map(|&s| {
            let per_seed = runs
                .iter()
                .filter(|r| r.strategy == s)
                .map(|r| r.iterations.iter().map(|it| it.miou).collect())
                .collect();
            (s.name().to_string(), per_seed)
        })
        .collect();
    let comparison = if cfg.trainer.iterations == 0 {
        ComparisonTable { baseline: String::new(), iterations: 0, rows: Vec::new() }
    } else {
        compare_strategies(&curves)?
    };
    Ok(SimulateResults {
        config: cfg.to_json(),
        n_points,
        holdout_points: holdout.as_ref().map(|h| h.labels.len()),
        strategies: strategies.to_vec(),
        seeds: seeds.to_vec(),
        runs,
        comparison,
    })
}

pub fn cmd_simulate(a: &SimulateArgs, threads: usize) -> Result<()> {
    let strategies = a
        .strategies
        .iter()
        .map(|s| Strategy::from_str(s.trim()))
        .collect::<alseg::Result<Vec<_>>>()?;
    let mut seen = strategies.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != strategies.len() {
        bail!(Error::InvalidArgument("a strategy is listed twice".into()));
    }
    let cfg = effective_config(&a.overrides)?;
    let cloud = load_cloud(&a.cloud)?;
    let holdout = a.holdout.as_deref().map(load_cloud).transpose()?;
    let base = cfg.trainer.seed;
    let seeds: Vec<u64> = (0..a.seeds).map(|i| base.wrapping_add(i)).collect();
    let results = simulate(cloud, holdout.as_ref(), &cfg, &strategies, &seeds, threads)?;
    write_json(&a.out, &results)?;

    println!("strategy    final mIoU        vs {}", results.comparison.baseline);
    for row in &results.comparison.rows {
        let delta = row
            .delta_vs_baseline
            .map(|d| format!("{:+.2}", 100.0 * d))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<10}  {:6.2} ± {:5.2}  {delta}",
            row.strategy,
            100.0 * row.final_mean,
            100.0 * row.final_std
        );
    }
    Ok(())
}

/// Predicted class per row: the value itself for one column, else argmax.
pub fn predicted_classes(m: &Matrix) -> Result<Vec<u32>> {
    if m.cols == 0 {
        bail!(Error::Matrix("prediction matrix has no columns".into()));
    }
    if m.cols == 1 {
        return match &m.data {
            MatrixData::U32(v) => Ok(v.clone()),
            MatrixData::F32(v) => v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f32 {
                        Ok(x as u32)
                    } else {
                        Err(Error::InvalidArgument(format!("row {i}: {x} is not a class id")).into())
                    }
                })
                .collect(),
        };
    }
    let values = m.to_f64();
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Error::InvalidArgument("prediction matrix holds non-finite values".into()));
    }
    Ok(values
        .chunks_exact(m.cols)
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best as u32
        })
        .collect())
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub n_points: usize,
    pub n_classes: usize,
    #[serde(flatten)]
    pub iou: MeanIou,
}

pub fn evaluate(pred: &Matrix, cloud: &PointCloud) -> Result<EvalReport> {
    let gt = cloud.labels()?;
    check_rows("prediction rows vs cloud points", pred, gt.len())?;
    let pred = predicted_classes(pred)?;
    let n_classes = gt.iter().chain(&pred).max().map_or(0, |&m| m as usize + 1);
    let cm = confusion(&pred, gt, n_classes)?;
    Ok(EvalReport {
        n_points: gt.len(),
        n_classes,
        iou: miou(&cm)?,
    })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cloud = load_cloud(&a.cloud)?;
    let pred = load_matrix(&a.pred)?;
    let report = evaluate(&pred, &cloud)?;
    write_json(&a.out, &report)?;
    println!("mIoU {:.4} over {} classes", report.iou.miou, report.iou.per_class.iter().flatten().count());
    Ok(())
}

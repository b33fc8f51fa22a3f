//! JSON run configuration.
//!
//! ```json
//! {
//!   "levels": [{"radius_m": 0.1, "weight": 0.1}],
//!   "fds": {"radius_m": 0.2, "tau": 0.8},
//!   "budget": {"initial_fraction": 0.0, "per_iter_fraction": 0.0002, "iterations": 5},
//!   "trainer": {"alpha": 0.955, "pseudo_threshold": 0.75, "learning_rate": 0.5,
//!               "steps": 100, "seed": 1, "jitter_sigma_m": 0.01, "color_sigma": 0.02,
//!               "feature_radius_m": 0.15, "augment_views": 2, "retrain_from_scratch": false},
//!   "strategy": "hmmu_fds",
//!   "context_mode": "exact"
//! }
//! ```
//!
//! Every key is optional. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::{SelectionConfig, Strategy};
use crate::trainer::TrainerConfig;
use crate::uncertainty::{ContextMode, LevelSpec, ScoringConfig};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub trainer: TrainerConfig,
    /// `budget_k` is left at 0; the loop derives it from the budget schedule.
    pub selection: SelectionConfig,
    pub scoring: ScoringConfig,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    levels: Option<Vec<FileLevel>>,
    fds: Option<FileFds>,
    budget: Option<FileBudget>,
    trainer: Option<FileTrainer>,
    strategy: Option<Strategy>,
    context_mode: Option<ContextMode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLevel {
    radius_m: f64,
    weight: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFds {
    radius_m: Option<f64>,
    tau: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBudget {
    initial_fraction: Option<f64>,
    per_iter_fraction: Option<f64>,
    iterations: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTrainer {
    alpha: Option<f64>,
    pseudo_threshold: Option<f64>,
    learning_rate: Option<f64>,
    steps: Option<usize>,
    seed: Option<u64>,
    jitter_sigma_m: Option<f64>,
    color_sigma: Option<f64>,
    feature_radius_m: Option<f64>,
    augment_views: Option<usize>,
    retrain_from_scratch: Option<bool>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        self.selection.validate()?;
        self.trainer.validate()
    }

    /// The complete effective configuration in file form.
    pub fn to_json(&self) -> serde_json::Value {
        let t = &self.trainer;
        let file = FileConfig {
            levels: Some(
                self.scoring
                    .levels
                    .iter()
                    .map(|l| FileLevel {
                        radius_m: l.radius,
                        weight: l.weight,
                    })
                    .collect(),
            ),
            fds: Some(FileFds {
                radius_m: Some(self.selection.radius),
                tau: Some(self.selection.tau),
            }),
            budget: Some(FileBudget {
                initial_fraction: Some(t.initial_fraction),
                per_iter_fraction: Some(t.per_iter_fraction),
                iterations: Some(t.iterations),
            }),
            trainer: Some(FileTrainer {
                alpha: Some(t.alpha),
                pseudo_threshold: Some(t.pseudo_threshold),
                learning_rate: Some(t.learning_rate),
                steps: Some(t.steps),
                seed: Some(t.seed),
                jitter_sigma_m: Some(t.jitter_sigma),
                color_sigma: Some(t.color_sigma),
                feature_radius_m: Some(t.feature_radius),
                augment_views: Some(t.augment_views),
                retrain_from_scratch: Some(t.retrain_from_scratch),
            }),
            strategy: Some(self.selection.strategy),
            context_mode: Some(self.scoring.context_mode),
        };
        serde_json::to_value(file).unwrap_or_default()
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: FileConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::Config(e.inner().to_string())
        } else {
            Error::Config(format!("{path}: {}", e.inner()))
        }
    })?;

    let mut cfg = RunConfig::default();
    if let Some(levels) = file.levels {
        cfg.scoring.levels = levels
            .into_iter()
            .map(|l| LevelSpec {
                radius: l.radius_m,
                weight: l.weight,
            })
            .collect();
    }
    if let Some(mode) = file.context_mode {
        cfg.scoring.context_mode = mode;
    }
    if let Some(fds) = file.fds {
        if let Some(r) = fds.radius_m {
            cfg.selection.radius = r;
        }
        if let Some(tau) = fds.tau {
            cfg.selection.tau = tau;
        }
    }
    if let Some(s) = file.strategy {
        cfg.selection.strategy = s;
    }
    let t = &mut cfg.trainer;
    if let Some(b) = file.budget {
        set(&mut t.initial_fraction, b.initial_fraction);
        set(&mut t.per_iter_fraction, b.per_iter_fraction);
        set(&mut t.iterations, b.iterations);
    }
    if let Some(f) = file.trainer {
        set(&mut t.alpha, f.alpha);
        set(&mut t.pseudo_threshold, f.pseudo_threshold);
        set(&mut t.learning_rate, f.learning_rate);
        set(&mut t.steps, f.steps);
        set(&mut t.seed, f.seed);
        set(&mut t.jitter_sigma, f.jitter_sigma_m);
        set(&mut t.color_sigma, f.color_sigma);
        set(&mut t.feature_radius, f.feature_radius_m);
        set(&mut t.augment_views, f.augment_views);
        set(&mut t.retrain_from_scratch, f.retrain_from_scratch);
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    })?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

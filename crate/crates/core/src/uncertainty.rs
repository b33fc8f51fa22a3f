//! Acquisition scores: hierarchical minimum-margin scoring and the
//! point-wise baselines (entropy, least confidence, random).
//!
//! All margin-type scores are "small = uncertain"; selection ranks them
//! ascending. Entropy, least confidence and random are "large = uncertain".

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{PointCloud, ProbabilityField};
use crate::spatial::{build_grid, visit_radius, RadiusIndex, VoxelGrid};

/// One contextual level: neighborhood radius in meters and fusion weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub radius: f64,
    pub weight: f64,
}

impl LevelSpec {
    pub fn new(radius: f64, weight: f64) -> Result<Self> {
        let spec = LevelSpec { radius, weight };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid(format!("level radius must be positive, got {}", self.radius)));
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(invalid(format!("level weight must be non-negative, got {}", self.weight)));
        }
        Ok(())
    }
}

/// 10 cm / 50 cm / 100 cm contexts weighted 0.1 / 0.01 / 0.001.
pub fn default_levels() -> Vec<LevelSpec> {
    vec![
        LevelSpec { radius: 0.10, weight: 0.1 },
        LevelSpec { radius: 0.50, weight: 0.01 },
        LevelSpec { radius: 1.00, weight: 0.001 },
    ]
}

/// How a level's contextual distribution is gathered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Mean over the exact radius neighborhood of each point.
    #[default]
    Exact,
    /// Mean over the point's voxel (edge = level radius); every member of a
    /// voxel shares one distribution.
    Voxel,
}

/// Contextual levels plus how their neighborhoods are gathered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub levels: Vec<LevelSpec>,
    pub context_mode: ContextMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            levels: default_levels(),
            context_mode: ContextMode::Exact,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        self.levels.iter().try_for_each(LevelSpec::validate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyScores {
    /// Point-level margin per point.
    pub point: Vec<f64>,
    /// Contextual margin per level, per point.
    pub levels: Vec<Vec<f64>>,
    /// Point margin plus weighted contextual margins.
    pub fused: Vec<f64>,
}

fn top_two(row: &[f64]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &p in row {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    (first, second)
}

/// Highest minus second-highest probability; 1 for a single-class row.
pub fn point_margin(row: &[f64]) -> Result<f64> {
    match row.len() {
        0 => Err(invalid("margin of an empty probability row")),
        1 => Ok(1.0),
        _ => {
            let (p1, p2) = top_two(row);
            Ok(p1 - p2)
        }
    }
}

/// Margin of a contextual (averaged) distribution.
pub fn level_margin(s_r: &[f64]) -> Result<f64> {
    point_margin(s_r)
}

/// Mean probability row over all points within `v_r` of point `center_index`.
pub fn contextual_distribution(
    cloud: &PointCloud,
    probs: &ProbabilityField,
    grid: &VoxelGrid,
    center_index: usize,
    v_r: f64,
) -> Result<Vec<f64>> {
    if !(v_r > 0.0) {
        return Err(invalid(format!("context radius must be positive, got {v_r}")));
    }
    if center_index >= cloud.len() {
        return Err(Error::IndexOutOfRange { index: center_index, n: cloud.len() });
    }
    check_pairing(cloud, probs)?;
    let c = probs.n_classes;
    let mut acc = vec![0.0; c];
    let mut count = 0usize;
    let mut members = Vec::new();
    visit_radius(grid, cloud, &cloud.positions[center_index], v_r, |j| members.push(j));
    members.sort_unstable();
    for j in members {
        for (a, p) in acc.iter_mut().zip(probs.row(j)) {
            *a += p;
        }
        count += 1;
    }
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}

/// `u_point + sum_i weight_i * u_levels[i]`.
pub fn fuse_scores(u_point: f64, u_levels: &[f64], specs: &[LevelSpec]) -> Result<f64> {
    if u_levels.len() != specs.len() {
        return Err(Error::DimensionMismatch {
            what: "level scores vs level specs",
            expected: specs.len(),
            got: u_levels.len(),
        });
    }
    Ok(u_levels
        .iter()
        .zip(specs)
        .fold(u_point, |acc, (u, s)| acc + s.weight * u))
}

fn check_pairing(cloud: &PointCloud, probs: &ProbabilityField) -> Result<()> {
    if probs.n_points() != cloud.len() {
        return Err(Error::DimensionMismatch {
            what: "probability rows vs cloud points",
            expected: cloud.len(),
            got: probs.n_points(),
        });
    }
    Ok(())
}

/// Hierarchical margin scores with exact radius contexts.
pub fn score_hmmu(cloud: &PointCloud, probs: &ProbabilityField, specs: &[LevelSpec]) -> Result<UncertaintyScores> {
    score_hmmu_with_mode(cloud, probs, specs, ContextMode::Exact)
}

pub fn score_hmmu_with_mode(
    cloud: &PointCloud,
    probs: &ProbabilityField,
    specs: &[LevelSpec],
    mode: ContextMode,
) -> Result<UncertaintyScores> {
    check_pairing(cloud, probs)?;
    for s in specs {
        s.validate()?;
    }
    let point = probs.rows().map(point_margin).collect::<Result<Vec<f64>>>()?;

    let index = (mode == ContextMode::Exact && !specs.is_empty()).then(|| RadiusIndex::new(cloud));
    let mut levels = Vec::with_capacity(specs.len());
    for spec in specs {
        let context = match &index {
            Some(index) => index.means(&probs.probs, probs.n_classes, spec.radius)?,
            None => voxel_means(cloud, probs, spec.radius)?,
        };
        let margins = context
            .chunks_exact(probs.n_classes)
            .map(level_margin)
            .collect::<Result<Vec<f64>>>()?;
        levels.push(margins);
    }

    let mut fused = Vec::with_capacity(point.len());
    let mut u_levels = vec![0.0; specs.len()];
    for i in 0..point.len() {
        for (u, lv) in u_levels.iter_mut().zip(&levels) {
            *u = lv[i];
        }
        fused.push(fuse_scores(point[i], &u_levels, specs)?);
    }
    Ok(UncertaintyScores { point, levels, fused })
}

/// Per-voxel mean distribution broadcast back to every member point.
fn voxel_means(cloud: &PointCloud, probs: &ProbabilityField, edge: f64) -> Result<Vec<f64>> {
    let c = probs.n_classes;
    let mut out = vec![0.0; cloud.len() * c];
    if cloud.is_empty() {
        return Ok(out);
    }
    let grid = build_grid(cloud, edge)?;
    for key in grid.sorted_keys() {
        let members = grid.bucket(&key);
        let mut acc = vec![0.0; c];
        for &j in members {
            for (a, p) in acc.iter_mut().zip(probs.row(j)) {
                *a += p;
            }
        }
        let inv = 1.0 / members.len() as f64;
        for &j in members {
            for (o, a) in out[j * c..(j + 1) * c].iter_mut().zip(&acc) {
                *o = a * inv;
            }
        }
    }
    Ok(out)
}

/// Shannon entropy per row (natural log, `0 ln 0 = 0`).
pub fn score_entropy(probs: &ProbabilityField) -> Vec<f64> {
    probs
        .rows()
        .map(|row| {
            -row.iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * p.ln())
                .sum::<f64>()
        })
        .collect()
}

/// `1 - max p` per row.
pub fn score_least_confidence(probs: &ProbabilityField) -> Vec<f64> {
    probs
        .rows()
        .map(|row| 1.0 - row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Seeded uniform draws in `[0, 1)`.
pub fn score_random(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("random scores need n > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| rng.gen::<f64>()).collect())
}

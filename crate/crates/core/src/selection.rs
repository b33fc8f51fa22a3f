//! Turning scores into an annotation batch: ranking, plain top-K and
//! feature-distance suppression (FDS).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{FeatureField, PointCloud};
use crate::spatial::{dist2, voxel_key, VoxelKey};

/// Acquisition strategy names as used in configs and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Entropy,
    Lc,
    Mmu,
    Hmmu,
    HmmuFds,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Random,
        Strategy::Entropy,
        Strategy::Lc,
        Strategy::Mmu,
        Strategy::Hmmu,
        Strategy::HmmuFds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Lc => "lc",
            Strategy::Mmu => "mmu",
            Strategy::Hmmu => "hmmu",
            Strategy::HmmuFds => "hmmu_fds",
        }
    }

    /// Margin scores are small when uncertain; the rest are large.
    pub fn direction(self) -> Direction {
        match self {
            Strategy::Mmu | Strategy::Hmmu | Strategy::HmmuFds => Direction::Ascending,
            Strategy::Random | Strategy::Entropy | Strategy::Lc => Direction::Descending,
        }
    }

    pub fn uses_fds(self) -> bool {
        self == Strategy::HmmuFds
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
                invalid(format!("unknown strategy {s:?}; valid strategies: {}", valid.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Ascending,
    Descending,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub budget_k: usize,
    /// Suppression radius in meters.
    pub radius: f64,
    /// Feature-similarity threshold.
    pub tau: f64,
    pub strategy: Strategy,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            budget_k: 0,
            radius: 0.20,
            tau: 0.8,
            strategy: Strategy::HmmuFds,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid(format!("fds radius must be positive, got {}", self.radius)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(invalid(format!("tau out of range [0,1]: {}", self.tau)));
        }
        Ok(())
    }
}

/// A candidate dropped by FDS and the selected neighbor responsible.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suppression {
    pub index: usize,
    pub neighbor: usize,
    pub distance: f64,
    pub similarity: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    pub suppressed: Vec<Suppression>,
    /// Set when the candidates ran out before the budget was met.
    pub exhausted: bool,
}

/// Candidates sorted by score in `direction`, ties by ascending index.
pub fn rank_candidates(scores: &[f64], candidates: &[usize], direction: Direction) -> Vec<usize> {
    let mut ranked = candidates.to_vec();
    match direction {
        Direction::Ascending => {
            ranked.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
        }
        Direction::Descending => {
            ranked.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)))
        }
    }
    ranked
}

/// Cosine of the angle between two feature vectors; 0 if either is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "feature vectors",
            expected: a.len(),
            got: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

pub fn top_k_select(ranked: &[usize], budget_k: usize) -> SelectionResult {
    SelectionResult {
        selected: ranked.iter().take(budget_k).copied().collect(),
        suppressed: Vec::new(),
        exhausted: budget_k > ranked.len(),
    }
}

/// Greedy feature-distance suppression over a ranked candidate list.
///
/// A candidate is kept unless some already-kept point lies strictly within
/// `cfg.radius` with cosine similarity strictly above `cfg.tau`. The walk
/// continues past suppressed candidates until `cfg.budget_k` points are kept.
/// The recorded culprit is the most similar such neighbor (lowest index on
/// ties). Repeated candidates are ignored after their first occurrence.
pub fn fds_select(
    ranked: &[usize],
    cloud: &PointCloud,
    feats: &FeatureField,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let n = cloud.len();
    if feats.n_points() != n {
        return Err(Error::DimensionMismatch {
            what: "feature rows vs cloud points",
            expected: n,
            got: feats.n_points(),
        });
    }
    if let Some(&bad) = ranked.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }

    let r = cfg.radius;
    let r2 = r * r;
    let mut kept: HashMap<VoxelKey, Vec<usize>> = HashMap::new();
    let mut seen = vec![false; n];
    let mut result = SelectionResult::default();

    for &i in ranked {
        if result.selected.len() >= cfg.budget_k {
            break;
        }
        if std::mem::replace(&mut seen[i], true) {
            continue;
        }
        let p = &cloud.positions[i];
        let key = voxel_key(p, r);
        // padded so rounding at exactly distance r cannot skip a cell
        let reach = 1.001 * r;
        let lo = voxel_key(&[p[0] - reach, p[1] - reach, p[2] - reach], r);
        let hi = voxel_key(&[p[0] + reach, p[1] + reach, p[2] + reach], r);
        let mut culprit: Option<(usize, f64, f64)> = None;
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let Some(members) = kept.get(&[x, y, z]) else { continue };
                    for &j in members {
                        let d2 = dist2(&cloud.positions[j], p);
                        if d2 >= r2 {
                            continue;
                        }
                        let sim = cosine_similarity(feats.row(i), feats.row(j))?;
                        let better = match culprit {
                            None => true,
                            Some((cj, _, cs)) => sim > cs || (sim == cs && j < cj),
                        };
                        if better {
                            culprit = Some((j, d2.sqrt(), sim));
                        }
                    }
                }
            }
        }
        match culprit {
            Some((j, d, sim)) if sim > cfg.tau => result.suppressed.push(Suppression {
                index: i,
                neighbor: j,
                distance: d,
                similarity: sim,
            }),
            _ => {
                kept.entry(key).or_default().push(i);
                result.selected.push(i);
            }
        }
    }
    result.exhausted = result.selected.len() < cfg.budget_k;
    Ok(result)
}

/// First pair of selected points closer than `radius` whose similarity
/// exceeds `tau`, if any.
pub fn find_pairwise_violation(
    selected: &[usize],
    cloud: &PointCloud,
    feats: &FeatureField,
    radius: f64,
    tau: f64,
) -> Result<Option<(usize, usize)>> {
    let r2 = radius * radius;
    for (a, &i) in selected.iter().enumerate() {
        for &j in &selected[a + 1..] {
            if dist2(&cloud.positions[i], &cloud.positions[j]) < r2
                && cosine_similarity(feats.row(i), feats.row(j))? > tau
            {
                return Ok(Some((i, j)));
            }
        }
    }
    Ok(None)
}

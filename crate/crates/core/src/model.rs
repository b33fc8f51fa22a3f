//! Shared domain types: point clouds, per-point probability and feature
//! fields, and the labeled/unlabeled selection state.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance for a probability row to count as lying on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-5;

/// A point set with colors and optional ground-truth class ids.
///
/// Positions are in meters, colors are normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
    pub gt_labels: Option<Vec<u32>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting mismatched row counts and non-finite values.
    pub fn new(
        positions: Vec<[f64; 3]>,
        colors: Vec<[f64; 3]>,
        gt_labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        let cloud = PointCloud {
            positions,
            colors,
            gt_labels,
        };
        let report = validate_cloud(&cloud, None, None);
        if !report.is_ok() {
            return Err(invalid(report.to_string()));
        }
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Ground-truth labels, or [`Error::MissingLabels`].
    pub fn labels(&self) -> Result<&[u32]> {
        self.gt_labels.as_deref().ok_or(Error::MissingLabels)
    }

    /// Applies a permutation: point `i` of the result is point `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> PointCloud {
        PointCloud {
            positions: order.iter().map(|&i| self.positions[i]).collect(),
            colors: order.iter().map(|&i| self.colors[i]).collect(),
            gt_labels: self
                .gt_labels
                .as_ref()
                .map(|l| order.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Row-major `N x C` softmax predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityField {
    pub probs: Vec<f64>,
    pub n_classes: usize,
}

impl ProbabilityField {
    pub fn new(probs: Vec<f64>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(invalid("probability field needs at least one class"));
        }
        if !probs.len().is_multiple_of(n_classes) {
            return Err(invalid(format!(
                "{} values do not form rows of {} classes",
                probs.len(),
                n_classes
            )));
        }
        Ok(ProbabilityField { probs, n_classes })
    }

    /// Every row equal to the uniform distribution.
    pub fn uniform(n_points: usize, n_classes: usize) -> Self {
        ProbabilityField {
            probs: vec![1.0 / n_classes as f64; n_points * n_classes],
            n_classes,
        }
    }

    pub fn n_points(&self) -> usize {
        self.probs.len() / self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.probs.chunks_exact(self.n_classes)
    }

    /// Index of the largest entry per row; ties go to the lowest class id.
    pub fn argmax(&self) -> Vec<u32> {
        self.rows()
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect()
    }
}

/// Row-major `N x F` per-point features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureField {
    pub feats: Vec<f64>,
    pub dim: usize,
}

impl FeatureField {
    pub fn new(feats: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if !feats.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} values do not form rows of dimension {}",
                feats.len(),
                dim
            )));
        }
        Ok(FeatureField { feats, dim })
    }

    pub fn n_points(&self) -> usize {
        self.feats.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.feats[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.feats.chunks_exact(self.dim)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    RowCountMismatch,
    NonFinite,
    NotOnSimplex,
    LabelOutOfRange,
    ColorOutOfRange,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending row, when the violation is tied to one.
    pub row: Option<usize>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, row: Option<usize>, message: String) {
        self.violations.push(Violation { kind, row, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Checks the invariants of a cloud and its optional paired fields.
///
/// Never fails; every violated invariant is listed in the report.
pub fn validate_cloud(
    cloud: &PointCloud,
    probs: Option<&ProbabilityField>,
    feats: Option<&FeatureField>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = cloud.positions.len();

    if cloud.colors.len() != n {
        report.push(
            ViolationKind::RowCountMismatch,
            None,
            format!("row-count mismatch: {} colors for {} points", cloud.colors.len(), n),
        );
    }
    for (i, p) in cloud.positions.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            report.push(
                ViolationKind::NonFinite,
                Some(i),
                format!("position row {i} is not finite"),
            );
        }
    }
    for (i, c) in cloud.colors.iter().enumerate() {
        if c.iter().any(|v| !v.is_finite()) {
            report.push(
                ViolationKind::NonFinite,
                Some(i),
                format!("color row {i} is not finite"),
            );
        } else if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
            report.push(
                ViolationKind::ColorOutOfRange,
                Some(i),
                format!("color row {i} outside [0,1]"),
            );
        }
    }
    if let Some(labels) = &cloud.gt_labels {
        if labels.len() != n {
            report.push(
                ViolationKind::RowCountMismatch,
                None,
                format!("row-count mismatch: {} labels for {} points", labels.len(), n),
            );
        }
        if let Some(pf) = probs {
            for (i, &l) in labels.iter().enumerate() {
                if l as usize >= pf.n_classes {
                    report.push(
                        ViolationKind::LabelOutOfRange,
                        Some(i),
                        format!("label {l} at row {i} not below {} classes", pf.n_classes),
                    );
                }
            }
        }
    }

    if let Some(pf) = probs {
        if pf.n_classes == 0 || pf.probs.len() % pf.n_classes != 0 {
            report.push(
                ViolationKind::RowCountMismatch,
                None,
                "row-count mismatch: probabilities are not a whole number of rows".into(),
            );
        } else {
            if pf.n_points() != n {
                report.push(
                    ViolationKind::RowCountMismatch,
                    None,
                    format!("row-count mismatch: {} probability rows for {} points", pf.n_points(), n),
                );
            }
            for (i, row) in pf.rows().enumerate() {
                if row.iter().any(|v| !v.is_finite()) {
                    report.push(
                        ViolationKind::NonFinite,
                        Some(i),
                        format!("probability row {i} is not finite"),
                    );
                    continue;
                }
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&v| v < 0.0) {
                    report.push(
                        ViolationKind::NotOnSimplex,
                        Some(i),
                        format!("row {i} has a negative entry"),
                    );
                } else if (sum - 1.0).abs() > SIMPLEX_TOL {
                    report.push(
                        ViolationKind::NotOnSimplex,
                        Some(i),
                        format!("row {i} sums to {sum}"),
                    );
                }
            }
        }
    }

    if let Some(ff) = feats {
        if ff.dim == 0 || ff.feats.len() % ff.dim != 0 {
            report.push(
                ViolationKind::RowCountMismatch,
                None,
                "row-count mismatch: features are not a whole number of rows".into(),
            );
        } else {
            if ff.n_points() != n {
                report.push(
                    ViolationKind::RowCountMismatch,
                    None,
                    format!("row-count mismatch: {} feature rows for {} points", ff.n_points(), n),
                );
            }
            for (i, row) in ff.rows().enumerate() {
                if row.iter().any(|v| !v.is_finite()) {
                    report.push(
                        ViolationKind::NonFinite,
                        Some(i),
                        format!("feature row {i} is not finite"),
                    );
                }
            }
        }
    }

    report
}

/// Labeled/unlabeled partition of a scene's points plus the per-iteration
/// record of which points were promoted.
///
/// The unlabeled set is the complement of `labeled` in `0..n_points`, so the
/// partition invariant holds by construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SelectionStateRepr")]
pub struct SelectionState {
    n_points: usize,
    labeled: BTreeSet<usize>,
    initial_count: usize,
    iteration: usize,
    selections_per_iteration: Vec<Vec<usize>>,
    budget_spent: usize,
}

#[derive(Deserialize)]
struct SelectionStateRepr {
    n_points: usize,
    labeled: BTreeSet<usize>,
    initial_count: usize,
    iteration: usize,
    selections_per_iteration: Vec<Vec<usize>>,
    budget_spent: usize,
}

impl TryFrom<SelectionStateRepr> for SelectionState {
    type Error = String;

    fn try_from(r: SelectionStateRepr) -> std::result::Result<Self, String> {
        if let Some(&max) = r.labeled.iter().next_back() {
            if max >= r.n_points {
                return Err(format!("labeled index {max} out of range"));
            }
        }
        if r.selections_per_iteration.len() != r.iteration + 1 {
            return Err("selection history length does not match iteration".into());
        }
        let promoted: usize = r.selections_per_iteration.iter().map(Vec::len).sum();
        if promoted != r.budget_spent || r.labeled.len() != r.initial_count + r.budget_spent {
            return Err("budget_spent inconsistent with labeled set".into());
        }
        if r
            .selections_per_iteration
            .iter()
            .flatten()
            .any(|i| !r.labeled.contains(i))
        {
            return Err("selection history references an unlabeled index".into());
        }
        Ok(SelectionState {
            n_points: r.n_points,
            labeled: r.labeled,
            initial_count: r.initial_count,
            iteration: r.iteration,
            selections_per_iteration: r.selections_per_iteration,
            budget_spent: r.budget_spent,
        })
    }
}

impl SelectionState {
    /// Starts a state over `n_points` with the given initially labeled points.
    pub fn new(n_points: usize, initial: impl IntoIterator<Item = usize>) -> Result<Self> {
        let labeled: BTreeSet<usize> = initial.into_iter().collect();
        if let Some(&max) = labeled.iter().next_back() {
            if max >= n_points {
                return Err(Error::IndexOutOfRange { index: max, n: n_points });
            }
        }
        Ok(SelectionState {
            n_points,
            initial_count: labeled.len(),
            labeled,
            iteration: 0,
            selections_per_iteration: vec![Vec::new()],
            budget_spent: 0,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn labeled(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.labeled.contains(&index)
    }

    /// Unlabeled indices in ascending order.
    pub fn unlabeled(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_points - self.labeled.len());
        let mut labeled = self.labeled.iter().peekable();
        for i in 0..self.n_points {
            if labeled.peek() == Some(&&i) {
                labeled.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn n_unlabeled(&self) -> usize {
        self.n_points - self.labeled.len()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Promotions per iteration; entry 0 holds promotions made before the
    /// first call to [`SelectionState::next_iteration`].
    pub fn selections_per_iteration(&self) -> &[Vec<usize>] {
        &self.selections_per_iteration
    }

    pub fn budget_spent(&self) -> usize {
        self.budget_spent
    }

    pub fn initial_count(&self) -> usize {
        self.initial_count
    }

    pub fn labeled_fraction(&self) -> f64 {
        if self.n_points == 0 {
            0.0
        } else {
            self.labeled.len() as f64 / self.n_points as f64
        }
    }

    /// Opens a new iteration; later promotions are recorded under it.
    pub fn next_iteration(&mut self) {
        self.iteration += 1;
        self.selections_per_iteration.push(Vec::new());
    }

    /// Moves `indices` from unlabeled to labeled under the current iteration.
    ///
    /// The whole batch is checked before anything is moved, so a failed call
    /// leaves the state untouched.
    pub fn promote_to_labeled(&mut self, indices: &[usize]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &i in indices {
            if i >= self.n_points {
                return Err(Error::IndexOutOfRange { index: i, n: self.n_points });
            }
            if self.labeled.contains(&i) || !seen.insert(i) {
                return Err(Error::AlreadyLabeled(i));
            }
        }
        self.labeled.extend(indices.iter().copied());
        self.selections_per_iteration[self.iteration].extend_from_slice(indices);
        self.budget_spent += indices.len();
        Ok(())
    }
}

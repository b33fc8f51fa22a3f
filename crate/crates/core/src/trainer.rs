//! Teacher-student training of a linear point classifier and the
//! multi-iteration active-learning loop built on it.
//!
//! The classifier is multinomial logistic regression over standardized
//! geometric features. The student is fitted by full-batch gradient descent
//! on labeled points plus confident teacher pseudo-labels; after every step
//! the teacher follows the student by an exponential moving average.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{confusion, miou};
use crate::model::{FeatureField, PointCloud, ProbabilityField, SelectionState};
use crate::selection::{fds_select, rank_candidates, top_k_select, SelectionConfig, SelectionResult, Strategy};
use crate::spatial::local_geometric_features;
use crate::uncertainty::{
    score_entropy, score_hmmu_with_mode, score_least_confidence, score_random, ScoringConfig,
};

/// Linear classifier parameters: `weights` is row-major `C x F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmenterParams {
    pub n_classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SegmenterParams {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        SegmenterParams {
            n_classes,
            dim,
            weights: vec![0.0; n_classes * dim],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn new(n_classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != n_classes * dim {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: n_classes * dim,
                got: weights.len(),
            });
        }
        if bias.len() != n_classes {
            return Err(Error::DimensionMismatch {
                what: "bias",
                expected: n_classes,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        Ok(SegmenterParams {
            n_classes,
            dim,
            weights,
            bias,
        })
    }

    /// All parameters as one `C x (F + 1)` row-major matrix, bias last.
    pub fn to_matrix(&self) -> (usize, usize, Vec<f64>) {
        let cols = self.dim + 1;
        let mut out = Vec::with_capacity(self.n_classes * cols);
        for c in 0..self.n_classes {
            out.extend_from_slice(&self.weights[c * self.dim..(c + 1) * self.dim]);
            out.push(self.bias[c]);
        }
        (self.n_classes, cols, out)
    }

    pub fn from_matrix(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if cols < 1 || values.len() != rows * cols {
            return Err(invalid("parameter matrix shape does not match its values"));
        }
        let dim = cols - 1;
        let mut weights = Vec::with_capacity(rows * dim);
        let mut bias = Vec::with_capacity(rows);
        for row in values.chunks_exact(cols) {
            weights.extend_from_slice(&row[..dim]);
            bias.push(row[dim]);
        }
        SegmenterParams::new(rows, dim, weights, bias)
    }

    fn same_shape(&self, other: &SegmenterParams) -> Result<()> {
        if self.n_classes != other.n_classes || self.dim != other.dim {
            return Err(invalid(format!(
                "parameter shapes differ: {}x{} vs {}x{}",
                self.n_classes, self.dim, other.n_classes, other.dim
            )));
        }
        Ok(())
    }
}

fn check_dim(params: &SegmenterParams, feats: &FeatureField) -> Result<()> {
    if params.dim != feats.dim {
        return Err(Error::DimensionMismatch {
            what: "feature dimension vs parameters",
            expected: params.dim,
            got: feats.dim,
        });
    }
    Ok(())
}

/// Softmax of the logits for one feature row, written into `out`.
fn softmax_row(params: &SegmenterParams, f: &[f64], out: &mut [f64]) {
    let d = params.dim;
    let mut max = f64::NEG_INFINITY;
    for (c, o) in out.iter_mut().enumerate() {
        let w = &params.weights[c * d..(c + 1) * d];
        let z = params.bias[c] + w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        *o = z;
        max = max.max(z);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn predict(params: &SegmenterParams, feats: &FeatureField) -> Result<ProbabilityField> {
    check_dim(params, feats)?;
    let c = params.n_classes;
    let mut probs = vec![0.0; feats.n_points() * c];
    for (f, out) in feats.rows().zip(probs.chunks_exact_mut(c)) {
        softmax_row(params, f, out);
    }
    Ok(ProbabilityField { probs, n_classes: c })
}

/// Training targets as `(point index, class)` pairs, ascending by index.
pub type Targets = Vec<(usize, u32)>;

/// Mean cross-entropy over `targets`.
pub fn cross_entropy(params: &SegmenterParams, feats: &FeatureField, targets: &[(usize, u32)]) -> Result<f64> {
    check_dim(params, feats)?;
    if targets.is_empty() {
        return Err(invalid("cross-entropy over an empty target set"));
    }
    let mut p = vec![0.0; params.n_classes];
    let mut total = 0.0;
    for &(i, y) in targets {
        softmax_row(params, feats.row(i), &mut p);
        total -= p[y as usize].ln();
    }
    Ok(total / targets.len() as f64)
}

/// Analytic gradient of [`cross_entropy`] with respect to all parameters.
pub fn cross_entropy_gradient(
    params: &SegmenterParams,
    feats: &FeatureField,
    targets: &[(usize, u32)],
) -> Result<SegmenterParams> {
    check_dim(params, feats)?;
    if targets.is_empty() {
        return Err(invalid("gradient over an empty target set"));
    }
    let (c, d) = (params.n_classes, params.dim);
    let n = feats.n_points();
    let mut grad = SegmenterParams::zeros(c, d);
    let mut p = vec![0.0; c];
    let scale = 1.0 / targets.len() as f64;
    for &(i, y) in targets {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if y as usize >= c {
            return Err(invalid(format!("target class {y} not below {c}")));
        }
        let f = feats.row(i);
        softmax_row(params, f, &mut p);
        p[y as usize] -= 1.0;
        for k in 0..c {
            let g = p[k] * scale;
            grad.bias[k] += g;
            for (w, x) in grad.weights[k * d..(k + 1) * d].iter_mut().zip(f) {
                *w += g * x;
            }
        }
    }
    Ok(grad)
}

/// One full-batch gradient-descent step on the mean cross-entropy.
pub fn student_step(
    params: &SegmenterParams,
    feats: &FeatureField,
    targets: &[(usize, u32)],
    learning_rate: f64,
) -> Result<SegmenterParams> {
    let grad = cross_entropy_gradient(params, feats, targets)?;
    let mut next = params.clone();
    for (w, g) in next.weights.iter_mut().zip(&grad.weights) {
        *w -= learning_rate * g;
    }
    for (b, g) in next.bias.iter_mut().zip(&grad.bias) {
        *b -= learning_rate * g;
    }
    Ok(next)
}

/// `alpha * teacher + (1 - alpha) * student`, elementwise.
pub fn ema_update(teacher: &SegmenterParams, student: &SegmenterParams, alpha: f64) -> Result<SegmenterParams> {
    teacher.same_shape(student)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("ema keep rate out of range [0,1]: {alpha}")));
    }
    let mix = |t: &[f64], s: &[f64]| -> Vec<f64> {
        t.iter().zip(s).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect()
    };
    Ok(SegmenterParams {
        n_classes: teacher.n_classes,
        dim: teacher.dim,
        weights: mix(&teacher.weights, &student.weights),
        bias: mix(&teacher.bias, &student.bias),
    })
}

/// Confident teacher predictions on unlabeled points: `max p > threshold`.
pub fn pseudo_labels(teacher_probs: &ProbabilityField, labeled: &BTreeSet<usize>, threshold: f64) -> Targets {
    let mut out = Vec::new();
    let mut next_labeled = labeled.iter().peekable();
    for (i, row) in teacher_probs.rows().enumerate() {
        while next_labeled.peek().is_some_and(|&&l| l < i) {
            next_labeled.next();
        }
        if next_labeled.peek() == Some(&&i) {
            continue;
        }
        let mut best = 0;
        for (c, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = c;
            }
        }
        if row[best] > threshold {
            out.push((i, best as u32));
        }
    }
    out
}

/// Gaussian jitter on positions and colors; colors are clamped to `[0, 1]`.
pub fn augment(cloud: &PointCloud, jitter_sigma: f64, color_sigma: f64, rng: &mut impl Rng) -> Result<PointCloud> {
    let jitter = Normal::new(0.0, jitter_sigma).map_err(|e| invalid(format!("jitter sigma: {e}")))?;
    let tint = Normal::new(0.0, color_sigma).map_err(|e| invalid(format!("color sigma: {e}")))?;
    let mut out = cloud.clone();
    if jitter_sigma > 0.0 {
        for p in &mut out.positions {
            for v in p.iter_mut() {
                *v += jitter.sample(rng);
            }
        }
    }
    if color_sigma > 0.0 {
        for c in &mut out.colors {
            for v in c.iter_mut() {
                *v = (*v + tint.sample(rng)).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

/// Geometric features followed by per-column standardization fitted on a
/// reference cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub radius: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Featurizer {
    /// Fits the standardization on `cloud` and returns its transformed features.
    pub fn fit(cloud: &PointCloud, radius: f64) -> Result<(Self, FeatureField)> {
        let raw = local_geometric_features(cloud, radius)?;
        let n = raw.n_points().max(1) as f64;
        let d = raw.dim;
        let mut mean = vec![0.0; d];
        for row in raw.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in raw.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let featurizer = Featurizer { radius, mean, scale };
        let feats = featurizer.standardize(raw);
        Ok((featurizer, feats))
    }

    pub fn transform(&self, cloud: &PointCloud) -> Result<FeatureField> {
        Ok(self.standardize(local_geometric_features(cloud, self.radius)?))
    }

    fn standardize(&self, mut raw: FeatureField) -> FeatureField {
        let d = raw.dim;
        for row in raw.feats.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        raw
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// EMA keep rate.
    pub alpha: f64,
    /// Teacher confidence needed for a pseudo-label; 1 disables pseudo-labels.
    pub pseudo_threshold: f64,
    pub learning_rate: f64,
    /// Gradient steps per active iteration.
    pub steps: usize,
    pub seed: u64,
    /// Position noise (meters) for the student's augmented views.
    pub jitter_sigma: f64,
    pub color_sigma: f64,
    pub iterations: usize,
    pub per_iter_fraction: f64,
    pub initial_fraction: f64,
    /// Neighborhood radius of the geometric featurizer.
    pub feature_radius: f64,
    /// Distinct augmented views generated per active iteration; steps cycle
    /// through them.
    pub augment_views: usize,
    /// Reset the student to zero before every active iteration instead of
    /// fine-tuning.
    pub retrain_from_scratch: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            alpha: 0.955,
            pseudo_threshold: 0.75,
            learning_rate: 0.5,
            steps: 100,
            seed: 1,
            jitter_sigma: 0.01,
            color_sigma: 0.02,
            iterations: 5,
            per_iter_fraction: 0.0002,
            initial_fraction: 0.0,
            feature_radius: 0.15,
            augment_views: 2,
            retrain_from_scratch: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(format!("{name} out of range [0,1]: {v}")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("pseudo_threshold", self.pseudo_threshold)?;
        unit("per_iter_fraction", self.per_iter_fraction)?;
        unit("initial_fraction", self.initial_fraction)?;
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid(format!("learning_rate must be positive: {}", self.learning_rate)));
        }
        if !(self.jitter_sigma >= 0.0) || !(self.color_sigma >= 0.0) {
            return Err(invalid("augmentation sigmas must be non-negative"));
        }
        if !(self.feature_radius > 0.0) {
            return Err(invalid(format!("feature_radius must be positive: {}", self.feature_radius)));
        }
        if self.augment_views == 0 {
            return Err(invalid("augment_views must be at least 1"));
        }
        Ok(())
    }
}

/// A labeled cloud prepared for training: the annotation oracle plus the
/// fitted featurizer and clean features.
#[derive(Clone, Debug)]
pub struct TrainingScene {
    pub cloud: PointCloud,
    pub labels: Vec<u32>,
    pub n_classes: usize,
    pub featurizer: Featurizer,
    pub features: FeatureField,
}

impl TrainingScene {
    /// Class count is one more than the largest ground-truth id.
    pub fn new(cloud: PointCloud, feature_radius: f64) -> Result<Self> {
        let labels = cloud.labels()?.to_vec();
        if labels.is_empty() {
            return Err(invalid("training scene is empty"));
        }
        let n_classes = *labels.iter().max().unwrap() as usize + 1;
        let (featurizer, features) = Featurizer::fit(&cloud, feature_radius)?;
        Ok(TrainingScene {
            cloud,
            labels,
            n_classes,
            featurizer,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub student: SegmenterParams,
    pub teacher: SegmenterParams,
    /// Student predictions on the clean features.
    pub predictions: ProbabilityField,
}

fn round_rng(seed: u64, stream: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(round) << 20);
    rng
}

const STREAM_AUGMENT: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_RANDOM_SCORES: u64 = 3;

/// Runs `cfg.steps` teacher-student rounds starting from `student`, with the
/// teacher initialized to the student. `round` decorrelates the augmentation
/// noise of successive calls.
pub fn train_iteration(
    scene: &TrainingScene,
    state: &SelectionState,
    student: &SegmenterParams,
    cfg: &TrainerConfig,
    round: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if state.labeled().is_empty() {
        return Err(invalid("training needs at least one labeled point"));
    }
    if state.n_points() != scene.len() {
        return Err(Error::DimensionMismatch {
            what: "selection state vs scene points",
            expected: scene.len(),
            got: state.n_points(),
        });
    }
    let mut student = student.clone();
    let mut teacher = student.clone();
    let truth: Targets = state
        .labeled()
        .iter()
        .map(|&i| (i, scene.labels[i]))
        .collect();

    if cfg.steps > 0 {
        let mut rng = round_rng(cfg.seed, STREAM_AUGMENT, round);
        let views = (0..cfg.augment_views.min(cfg.steps))
            .map(|_| {
                let cloud = augment(&scene.cloud, cfg.jitter_sigma, cfg.color_sigma, &mut rng)?;
                scene.featurizer.transform(&cloud)
            })
            .collect::<Result<Vec<FeatureField>>>()?;

        for step in 0..cfg.steps {
            let targets = if cfg.pseudo_threshold < 1.0 {
                let teacher_probs = predict(&teacher, &scene.features)?;
                merge_targets(&truth, &pseudo_labels(&teacher_probs, state.labeled(), cfg.pseudo_threshold))
            } else {
                truth.clone()
            };
            student = student_step(&student, &views[step % views.len()], &targets, cfg.learning_rate)?;
            teacher = ema_update(&teacher, &student, cfg.alpha)?;
        }
    }
    let predictions = predict(&student, &scene.features)?;
    Ok(TrainOutcome {
        student,
        teacher,
        predictions,
    })
}

fn merge_targets(a: &[(usize, u32)], b: &[(usize, u32)]) -> Targets {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 <= b[j].0) {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub labeled_count: usize,
    pub labeled_fraction: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub selected: Vec<usize>,
    pub exhausted: bool,
    /// Seconds spent on the iteration; not serialized so reports stay
    /// reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Labeled count the schedule requires after `iteration` iterations.
pub fn scheduled_labeled_count(n_points: usize, cfg: &TrainerConfig, iteration: usize) -> usize {
    let fraction = cfg.initial_fraction + iteration as f64 * cfg.per_iter_fraction;
    // the epsilon absorbs binary rounding of products like 5 * 0.0002 * 50000
    ((n_points as f64 * fraction) + 1e-9).floor().min(n_points as f64) as usize
}

/// Acquisition scores of `strategy` for the current predictions on `cloud`.
pub fn strategy_scores(
    strategy: Strategy,
    cloud: &PointCloud,
    predictions: &ProbabilityField,
    scoring: &ScoringConfig,
    random_seed: u64,
) -> Result<Vec<f64>> {
    if predictions.n_points() != cloud.len() {
        return Err(Error::DimensionMismatch {
            what: "probability rows vs cloud points",
            expected: cloud.len(),
            got: predictions.n_points(),
        });
    }
    Ok(match strategy {
        Strategy::Random => score_random(cloud.len(), random_seed)?,
        Strategy::Entropy => score_entropy(predictions),
        Strategy::Lc => score_least_confidence(predictions),
        Strategy::Mmu => score_hmmu_with_mode(cloud, predictions, &[], scoring.context_mode)?.fused,
        Strategy::Hmmu | Strategy::HmmuFds => {
            score_hmmu_with_mode(cloud, predictions, &scoring.levels, scoring.context_mode)?.fused
        }
    })
}

/// The full active-learning simulation on a labeled cloud.
pub fn active_loop(
    cloud: &PointCloud,
    cfg: &TrainerConfig,
    sel_cfg: &SelectionConfig,
    scoring: &ScoringConfig,
) -> Result<Vec<IterationReport>> {
    cfg.validate()?;
    let scene = TrainingScene::new(cloud.clone(), cfg.feature_radius)?;
    active_loop_on(&scene, cfg, sel_cfg, scoring)
}

/// A labeled scene kept out of training, featurized with the training
/// scene's standardization, on which iteration reports are scored instead.
#[derive(Clone, Debug)]
pub struct HoldOut {
    pub features: FeatureField,
    pub labels: Vec<u32>,
}

impl HoldOut {
    pub fn new(train: &TrainingScene, cloud: &PointCloud) -> Result<Self> {
        let labels = cloud.labels()?.to_vec();
        if labels.is_empty() {
            return Err(invalid("held-out scene is empty"));
        }
        Ok(HoldOut {
            features: train.featurizer.transform(cloud)?,
            labels,
        })
    }
}

/// [`active_loop`] on a prepared scene, so several runs can share features.
///
/// Iteration `i` selects a batch, hands it to the ground-truth oracle,
/// trains, and reports mIoU over all points. The first batch of a run with
/// no labels yet is drawn at random, since there is no model to score with.
pub fn active_loop_on(
    scene: &TrainingScene,
    cfg: &TrainerConfig,
    sel_cfg: &SelectionConfig,
    scoring: &ScoringConfig,
) -> Result<Vec<IterationReport>> {
    active_loop_eval(scene, None, cfg, sel_cfg, scoring)
}

/// [`active_loop_on`] with reports scored on `holdout` when given.
pub fn active_loop_eval(
    scene: &TrainingScene,
    holdout: Option<&HoldOut>,
    cfg: &TrainerConfig,
    sel_cfg: &SelectionConfig,
    scoring: &ScoringConfig,
) -> Result<Vec<IterationReport>> {
    cfg.validate()?;
    sel_cfg.validate()?;
    scoring.validate()?;
    let n = scene.len();
    let c = scene.n_classes;
    let dim = scene.features.dim;

    let initial_count = scheduled_labeled_count(n, cfg, 0);
    let initial: Vec<usize> = {
        let mut rng = round_rng(cfg.seed, STREAM_INITIAL, 0);
        let mut picked = sample(&mut rng, n, initial_count).into_vec();
        picked.sort_unstable();
        picked
    };
    let mut state = SelectionState::new(n, initial)?;
    let mut student = SegmenterParams::zeros(c, dim);
    let mut predictions: Option<ProbabilityField> = None;
    if !state.labeled().is_empty() {
        let out = train_iteration(scene, &state, &student, cfg, 0)?;
        student = out.student;
        predictions = Some(out.predictions);
    }

    let mut reports = Vec::with_capacity(cfg.iterations);
    for it in 1..=cfg.iterations {
        let started = Instant::now();
        state.next_iteration();
        let target = scheduled_labeled_count(n, cfg, it);
        let budget = target.saturating_sub(state.labeled().len());
        let candidates = state.unlabeled();

        let result = if budget == 0 {
            SelectionResult::default()
        } else {
            match &predictions {
                None => {
                    let seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
                    let scores = score_random(n, seed)?;
                    let ranked = rank_candidates(&scores, &candidates, Strategy::Random.direction());
                    top_k_select(&ranked, budget)
                }
                Some(probs) => {
                    let seed = round_rng(cfg.seed, STREAM_RANDOM_SCORES, it as u64).gen();
                    let scores = strategy_scores(sel_cfg.strategy, &scene.cloud, probs, scoring, seed)?;
                    let ranked = rank_candidates(&scores, &candidates, sel_cfg.strategy.direction());
                    if sel_cfg.strategy.uses_fds() {
                        let cfg_k = SelectionConfig {
                            budget_k: budget,
                            ..*sel_cfg
                        };
                        fds_select(&ranked, &scene.cloud, &scene.features, &cfg_k)?
                    } else {
                        top_k_select(&ranked, budget)
                    }
                }
            }
        };
        state.promote_to_labeled(&result.selected)?;

        let probs = if state.labeled().is_empty() {
            predict(&student, &scene.features)?
        } else {
            let start = if cfg.retrain_from_scratch {
                SegmenterParams::zeros(c, dim)
            } else {
                student.clone()
            };
            let out = train_iteration(scene, &state, &start, cfg, it as u64)?;
            student = out.student;
            out.predictions
        };
        let scores = match holdout {
            None => miou(&confusion(&probs.argmax(), &scene.labels, c)?)?,
            Some(h) => {
                let held = predict(&student, &h.features)?;
                let classes = c.max(h.labels.iter().max().map_or(0, |&m| m as usize + 1));
                miou(&confusion(&held.argmax(), &h.labels, classes)?)?
            }
        };
        predictions = Some(probs);

        reports.push(IterationReport {
            iteration: it,
            labeled_count: state.labeled().len(),
            labeled_fraction: state.labeled_fraction(),
            per_class_iou: scores.per_class,
            miou: scores.miou,
            selected: result.selected,
            exhausted: result.exhausted,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(reports)
}

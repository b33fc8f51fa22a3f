//! Segmentation metrics and strategy comparison tables.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `C x C` counts; rows are ground truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.n_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn confusion(pred: &[u32], gt: &[u32], n_classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions vs ground truth",
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (i, (&p, &g)) in pred.iter().zip(gt).enumerate() {
        if p as usize >= n_classes || g as usize >= n_classes {
            return Err(invalid(format!(
                "class id out of range at point {i}: pred {p}, gt {g}, {n_classes} classes"
            )));
        }
        cm.counts[g as usize * n_classes + p as usize] += 1;
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanIou {
    pub miou: f64,
    /// `None` for classes absent from both prediction and ground truth.
    pub per_class: Vec<Option<f64>>,
}

/// Mean IoU over classes that occur in the prediction or the ground truth.
pub fn miou(cm: &ConfusionMatrix) -> Result<MeanIou> {
    if cm.total() == 0 {
        return Err(invalid("mIoU of an empty confusion matrix"));
    }
    let c = cm.n_classes;
    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = cm.get(k, k);
        let fn_: u64 = (0..c).filter(|&p| p != k).map(|p| cm.get(k, p)).sum();
        let fp: u64 = (0..c).filter(|&g| g != k).map(|g| cm.get(g, k)).sum();
        let denom = tp + fp + fn_;
        per_class.push((denom > 0).then(|| tp as f64 / denom as f64));
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    Ok(MeanIou { miou, per_class })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    /// Mean over runs of the mIoU after each iteration.
    pub mean_miou: Vec<f64>,
    pub final_mean: f64,
    /// Population standard deviation of the final mIoU over runs.
    pub final_std: f64,
    /// Final mean minus the baseline's; absent on the baseline row.
    pub delta_vs_baseline: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub iterations: usize,
    /// Sorted by final mean mIoU, best first; ties by strategy name.
    pub rows: Vec<ComparisonRow>,
}

/// Summarizes per-run mIoU curves (`strategy -> runs -> per-iteration mIoU`).
///
/// The baseline is `random` when present, otherwise the first strategy.
pub fn compare_strategies(curves: &[(String, Vec<Vec<f64>>)]) -> Result<ComparisonTable> {
    let Some((first, _)) = curves.first() else {
        return Err(invalid("no strategies to compare"));
    };
    let iterations = curves[0].1.first().map(Vec::len).unwrap_or(0);
    for (name, runs) in curves {
        if runs.is_empty() {
            return Err(invalid(format!("strategy {name} has no runs")));
        }
        if let Some(bad) = runs.iter().find(|r| r.len() != iterations) {
            return Err(Error::DimensionMismatch {
                what: "iterations per run",
                expected: iterations,
                got: bad.len(),
            });
        }
    }
    if iterations == 0 {
        return Err(invalid("runs contain no iterations"));
    }
    let baseline = curves
        .iter()
        .find(|(n, _)| n == "random")
        .map(|(n, _)| n.clone())
        .unwrap_or_else(|| first.clone());

    let mut rows: Vec<ComparisonRow> = curves
        .iter()
        .map(|(name, runs)| {
            let k = runs.len() as f64;
            let mean_miou: Vec<f64> = (0..iterations)
                .map(|it| runs.iter().map(|r| r[it]).sum::<f64>() / k)
                .collect();
            let final_mean = mean_miou[iterations - 1];
            let var = runs
                .iter()
                .map(|r| (r[iterations - 1] - final_mean).powi(2))
                .sum::<f64>()
                / k;
            ComparisonRow {
                strategy: name.clone(),
                mean_miou,
                final_mean,
                final_std: var.sqrt(),
                delta_vs_baseline: None,
            }
        })
        .collect();

    let base = rows
        .iter()
        .find(|r| r.strategy == baseline)
        .map(|r| r.final_mean)
        .unwrap_or_default();
    for row in &mut rows {
        if row.strategy != baseline {
            row.delta_vs_baseline = Some(row.final_mean - base);
        }
    }
    rows.sort_by(|a, b| {
        b.final_mean
            .total_cmp(&a.final_mean)
            .then_with(|| a.strategy.cmp(&b.strategy))
    });
    Ok(ComparisonTable {
        baseline,
        iterations,
        rows,
    })
}

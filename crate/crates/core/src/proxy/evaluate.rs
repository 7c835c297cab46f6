use serde::{Deserialize, Serialize};

use super::dataset::TrainingRow;
use super::learner::{Learner, Task};
use super::pricing::round_to_multiplier;
use super::ProxyError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerMetrics {
    pub rows: usize,
    /// Mean squared error over every predicted value.
    pub mse: f64,
    /// Share of (instance, zone) cells whose rounded multiplier misses the label.
    pub zero_one: Option<f64>,
}

/// Score zone-major predictions against `holdout` labels.
pub fn evaluate_predictions(
    task: Task,
    predictions: &[Vec<f64>],
    holdout: &[TrainingRow],
    multipliers: &[f64],
) -> Result<LearnerMetrics, ProxyError> {
    if holdout.is_empty() {
        return Err(ProxyError::EmptyHoldout);
    }
    if predictions.len() != holdout.len() {
        return Err(ProxyError::Shape(format!("{} predictions for {} rows", predictions.len(), holdout.len())));
    }
    let (mut sq, mut n, mut wrong, mut cells) = (0.0, 0usize, 0usize, 0usize);
    for (pred, row) in predictions.iter().zip(holdout) {
        let label = task.label(row);
        if pred.len() != label.len() {
            return Err(ProxyError::Shape(format!("prediction of length {} for label of length {}", pred.len(), label.len())));
        }
        for (p, l) in pred.iter().zip(label) {
            sq += (p - l) * (p - l);
            n += 1;
        }
        if task == Task::Pricing {
            for (p, &k) in pred.iter().zip(&row.pricing_index) {
                cells += 1;
                if round_to_multiplier(*p, multipliers) != k {
                    wrong += 1;
                }
            }
        }
    }
    Ok(LearnerMetrics {
        rows: holdout.len(),
        mse: sq / n.max(1) as f64,
        zero_one: (task == Task::Pricing).then(|| wrong as f64 / cells.max(1) as f64),
    })
}

pub fn evaluate_learner(learner: &Learner, holdout: &[TrainingRow], multipliers: &[f64]) -> Result<LearnerMetrics, ProxyError> {
    let preds = holdout.iter().map(|r| learner.predict(learner.task.input(r))).collect::<Result<Vec<_>, _>>()?;
    evaluate_predictions(learner.task, &preds, holdout, multipliers)
}

/// Most frequent first-epoch multiplier index over all zones of `rows`.
pub fn majority_multiplier(rows: &[TrainingRow], multipliers: usize) -> usize {
    let mut counts = vec![0usize; multipliers];
    for k in rows.iter().flat_map(|r| &r.pricing_index) {
        counts[*k] += 1;
    }
    // Ties go to the larger multiplier (lower index).
    (0..multipliers).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap_or(0)
}

/// Constant baselines: the training majority multiplier for pricing, zero for relocation.
pub fn baseline_metrics(
    task: Task,
    train: &[TrainingRow],
    holdout: &[TrainingRow],
    multipliers: &[f64],
) -> Result<LearnerMetrics, ProxyError> {
    let value = match task {
        Task::Pricing => multipliers[majority_multiplier(train, multipliers.len())],
        Task::Relocation => 0.0,
    };
    let preds: Vec<Vec<f64>> = holdout.iter().map(|r| vec![value; task.label(r).len()]).collect();
    evaluate_predictions(task, &preds, holdout, multipliers)
}

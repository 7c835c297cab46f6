use serde::{Deserialize, Serialize};

use super::features::LearnerInput;
use super::learner::{Learner, Task};
use super::restore::AggRelocation;
use super::ProxyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingPrediction {
    pub raw: Vec<f64>,
    pub index: Vec<usize>,
    pub multipliers: Vec<f64>,
}

/// Clamp to `[0, 1]` and pick the nearest multiplier; an exact midpoint goes
/// to the larger one.
pub fn round_to_multiplier(raw: f64, multipliers: &[f64]) -> usize {
    let x = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
    let mut best = 0;
    for k in 1..multipliers.len() {
        let (d, db) = ((multipliers[k] - x).abs(), (multipliers[best] - x).abs());
        let tie = (d - db).abs() <= 1e-12;
        if (!tie && d < db) || (tie && multipliers[k] > multipliers[best]) {
            best = k;
        }
    }
    best
}

pub fn predict_pricing(learner: &Learner, input: &LearnerInput, multipliers: &[f64]) -> Result<PricingPrediction, ProxyError> {
    if learner.task != Task::Pricing {
        return Err(ProxyError::Settings("learner was not trained for pricing".into()));
    }
    let raw = learner.predict(input)?;
    let index: Vec<usize> = raw.iter().map(|&r| round_to_multiplier(r, multipliers)).collect();
    Ok(PricingPrediction { multipliers: index.iter().map(|&k| multipliers[k]).collect(), raw, index })
}

pub fn predict_relocation(learner: &Learner, input: &LearnerInput) -> Result<AggRelocation, ProxyError> {
    if learner.task != Task::Relocation {
        return Err(ProxyError::Settings("learner was not trained for relocation".into()));
    }
    let raw = learner.predict(input)?;
    if raw.len() != 2 * input.zones() {
        return Err(ProxyError::Shape(format!("expected {} outputs, got {}", 2 * input.zones(), raw.len())));
    }
    Ok(AggRelocation::from_zone_major(&raw))
}

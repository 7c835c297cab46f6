use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{pricing_input, relocation_input, LearnerInput};
use super::ProxyError;
use crate::demand::draw_perturbation_pct;
use crate::mpc::{
    first_epoch_actions, instance::scale_demand, solve_exact, solve_heuristic, ExactLimits, HeuristicLimits, MpcInstance,
    SolveStatus,
};
use crate::numeric::round_half_up;
use crate::rng::{self, Rng, Stream};

pub const TRAINING_SET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSolver {
    Exact(ExactLimits),
    Heuristic(HeuristicLimits),
}

/// One solved instance: learner inputs and first-epoch labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    /// Index of the unperturbed instance this row was derived from.
    pub source: usize,
    pub zones: usize,
    pub pricing_input: LearnerInput,
    /// Inputs for the relocation learner under the labelled pricing.
    pub relocation_input: LearnerInput,
    /// Chosen first-epoch multiplier per zone.
    pub pricing_label: Vec<f64>,
    pub pricing_index: Vec<usize>,
    /// Zone-major `(outbound, inbound)` first-epoch relocation totals.
    pub relocation_label: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub schema_version: u32,
    pub multipliers: Vec<f64>,
    pub rows: Vec<TrainingRow>,
}

impl TrainingSet {
    pub fn new(multipliers: Vec<f64>, rows: Vec<TrainingRow>) -> Self {
        Self { schema_version: TRAINING_SET_SCHEMA_VERSION, multipliers, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Split by source instance so perturbed copies of one instance never
    /// straddle the two parts. The second part holds about
    /// `holdout_fraction` of the sources.
    pub fn split(&self, holdout_fraction: f64, rng: &mut Stream) -> (Vec<TrainingRow>, Vec<TrainingRow>) {
        let mut sources: Vec<usize> = self.rows.iter().map(|r| r.source).collect();
        sources.sort_unstable();
        sources.dedup();
        sources.shuffle(rng);
        let n = ((sources.len() as f64 * holdout_fraction).round() as usize).min(sources.len());
        let held: std::collections::HashSet<usize> = sources[..n].iter().copied().collect();
        self.rows.iter().cloned().partition(|r| !held.contains(&r.source))
    }

    pub fn save(&self, path: &Path) -> Result<(), ProxyError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProxyError> {
        let set: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if set.schema_version != TRAINING_SET_SCHEMA_VERSION {
            return Err(ProxyError::Checkpoint(format!("unsupported training set schema_version {}", set.schema_version)));
        }
        Ok(set)
    }
}

/// Add or delete `round(|pct| % of total)` baseline demand units. Deleted
/// units are picked uniformly among existing units; added units copy a
/// uniformly picked existing unit.
pub fn perturb_instance(inst: &MpcInstance, pct: f64, rng: &mut Stream) -> MpcInstance {
    let mut out = inst.clone();
    let total: u64 = inst.base_demand.iter().map(|&v| v as u64).sum();
    let count = round_half_up(pct.abs() / 100.0 * total as f64);
    let mut current = total;
    for _ in 0..count {
        if current == 0 {
            break;
        }
        let mut pick = rng.random_range(0..current);
        let cell = out
            .base_demand
            .iter_mut()
            .find(|v| {
                if pick < **v as u64 {
                    true
                } else {
                    pick -= **v as u64;
                    false
                }
            })
            .expect("pick lies below the total");
        if pct < 0.0 {
            *cell -= 1;
            current -= 1;
        } else {
            *cell += 1;
            current += 1;
        }
    }
    out.demand_options = scale_demand(&out.base_demand, &out.multipliers);
    out
}

pub fn label_instance(inst: &MpcInstance, source: usize, solver: LabelSolver) -> TrainingRow {
    let sol = match solver {
        LabelSolver::Exact(limits) => solve_exact(inst, limits),
        LabelSolver::Heuristic(limits) => solve_heuristic(inst, limits),
    };
    let actions = first_epoch_actions(inst, &sol);
    let mut relocation_label = Vec::with_capacity(2 * inst.zones);
    for i in 0..inst.zones {
        relocation_label.push(actions.outbound(i) as f64);
        relocation_label.push(actions.inbound(i) as f64);
    }
    TrainingRow {
        source,
        zones: inst.zones,
        pricing_input: pricing_input(inst),
        relocation_input: relocation_input(inst, &actions.multiplier_index),
        pricing_label: actions.multipliers.clone(),
        pricing_index: actions.multiplier_index.clone(),
        relocation_label,
        objective: sol.objective,
        status: sol.status,
    }
}

/// `perturbations` labelled variants per instance (`0` labels each instance as given).
pub fn build_training_set(instances: &[MpcInstance], perturbations: usize, solver: LabelSolver, seeds: &Rng) -> TrainingSet {
    let per = perturbations.max(1);
    let rows: Vec<TrainingRow> = (0..instances.len() * per)
        .into_par_iter()
        .map(|n| {
            let inst = &instances[n / per];
            if perturbations == 0 {
                return label_instance(inst, n, solver);
            }
            let mut stream = seeds.indexed(rng::PERTURBATION, n as u64);
            let pct = draw_perturbation_pct(&mut stream);
            label_instance(&perturb_instance(inst, pct, &mut stream), n / per, solver)
        })
        .collect();
    let multipliers = instances.first().map(|i| i.multipliers.clone()).unwrap_or_default();
    TrainingSet::new(multipliers, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TravelMatrix;
    use crate::weights::WeightParams;
    use ndarray::{Array2, Array3};

    fn inst() -> MpcInstance {
        let travel = TravelMatrix { seconds: Array2::from_elem((2, 2), 300.0), epochs: Array2::from_elem((2, 2), 1) };
        let mut base = Array3::zeros((2, 2, 2));
        base[[0, 1, 0]] = 60;
        base[[1, 0, 1]] = 40;
        MpcInstance::new(
            Array2::from_elem((2, 2), 3),
            base,
            vec![1.0, 0.5, 0.0],
            &travel,
            1,
            1.5,
            WeightParams { service_base: 0.5, service_decay: 0.75, relocation_scale: 0.001 },
            10,
        )
        .unwrap()
    }

    #[test]
    fn five_percent_of_a_hundred() {
        let mut rng = Rng::new(0).substream("p");
        let up = perturb_instance(&inst(), 5.0, &mut rng);
        assert_eq!(up.base_demand.sum(), 105);
        let down = perturb_instance(&inst(), -5.0, &mut rng);
        assert_eq!(down.base_demand.sum(), 95);
        assert_eq!(down.demand_options[[0, 0, 1, 0]] + down.demand_options[[0, 1, 0, 1]], 95);
    }

    #[test]
    fn zero_demand_labels() {
        let mut m = inst();
        m.base_demand.fill(0);
        m.demand_options.fill(0);
        let row = label_instance(&m, 0, LabelSolver::Heuristic(HeuristicLimits::default()));
        assert!(row.relocation_label.iter().all(|&v| v == 0.0));
        assert_eq!(row.objective, 0.0);
    }

    #[test]
    fn row_count_and_determinism() {
        let seeds = Rng::new(11);
        let solver = LabelSolver::Heuristic(HeuristicLimits::default());
        let a = build_training_set(&[inst(), inst(), inst()], 4, solver, &seeds);
        assert_eq!(a.len(), 12);
        let b = build_training_set(&[inst(), inst(), inst()], 4, solver, &seeds);
        assert_eq!(a, b);
        assert_eq!(build_training_set(&[inst()], 0, solver, &seeds).len(), 1);
    }

    #[test]
    fn split_keeps_sources_together() {
        let seeds = Rng::new(2);
        let set = build_training_set(&vec![inst(); 10], 3, LabelSolver::Heuristic(HeuristicLimits::default()), &seeds);
        let (train, hold) = set.split(0.3, &mut seeds.substream("split"));
        assert_eq!((train.len(), hold.len()), (21, 9));
        assert!(hold.iter().all(|h| train.iter().all(|t| t.source != h.source)));
    }
}

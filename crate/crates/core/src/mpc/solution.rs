use std::collections::BTreeSet;
use std::fmt;

use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::{MpcError, MpcInstance};

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    BudgetFeasible,
    InfeasibleReported,
}

/// Decision variables of one solve. Epochs are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSolution {
    pub schema_version: u32,
    /// `pricing[i, t, k] = 1` when multiplier `k` is chosen for zone `i` in epoch `t`.
    pub pricing: Array3<u8>,
    /// `relocation[i, j, t]`: vehicles starting to move from `i` to `j` in `t`.
    pub relocation: Array3<u32>,
    /// `service[i, j, t0, rho]`: vehicles picking up, in `rho`, requests placed in `t0`.
    pub service: Array4<u32>,
    /// `demand[i, j, t]`: demand kept after pricing.
    pub demand: Array3<u32>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl MpcSolution {
    pub fn zeros(inst: &MpcInstance) -> Self {
        let (z, t, k) = (inst.zones, inst.horizon, inst.multiplier_count());
        Self {
            schema_version: SOLUTION_SCHEMA_VERSION,
            pricing: Array3::zeros((z, t, k)),
            relocation: Array3::zeros((z, z, t)),
            service: Array4::zeros((z, z, t, t)),
            demand: Array3::zeros((z, z, t)),
            objective: 0.0,
            status: SolveStatus::Optimal,
        }
    }

    /// Build from a multiplier choice per `(zone, epoch)`; fills `pricing` and `demand`.
    pub fn with_choices(inst: &MpcInstance, choice: &Array2<usize>) -> Self {
        let mut sol = Self::zeros(inst);
        for ((i, t), &k) in choice.indexed_iter() {
            sol.pricing[[i, t, k]] = 1;
            for j in 0..inst.zones {
                sol.demand[[i, j, t]] = inst.demand_options[[k, i, j, t]];
            }
        }
        sol
    }

    /// Chosen multiplier index per `(zone, epoch)`, or `None` if the one-hot
    /// encoding is broken there.
    pub fn choice(&self, i: usize, t: usize) -> Option<usize> {
        let lane = self.pricing.slice(ndarray::s![i, t, ..]);
        let mut picked = lane.iter().enumerate().filter(|(_, &p)| p != 0);
        match (picked.next(), picked.next()) {
            (Some((k, &1)), None) => Some(k),
            _ => None,
        }
    }

    pub fn to_toml(&self) -> Result<String, MpcError> {
        toml::to_string(self).map_err(|e| MpcError::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, MpcError> {
        let sol: Self = toml::from_str(text).map_err(|e| MpcError::Format(e.to_string()))?;
        if sol.schema_version != SOLUTION_SCHEMA_VERSION {
            return Err(MpcError::Format(format!("unsupported solution schema_version {}", sol.schema_version)));
        }
        Ok(sol)
    }
}

/// Objective recomputed from `service` and `relocation` alone.
pub fn recompute_objective(inst: &MpcInstance, sol: &MpcSolution) -> f64 {
    let mut obj = 0.0;
    for ((i, j, t0, rho), &x) in sol.service.indexed_iter() {
        if x > 0 {
            obj += inst.service_gain(i, j, t0, rho) * x as f64;
        }
    }
    for ((i, j, t), &x) in sol.relocation.indexed_iter() {
        if x > 0 {
            obj -= inst.relocation_cost(i, j, t) * x as f64;
        }
    }
    obj
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    MultiplierChoice { zone: usize, epoch: usize },
    DemandLink { origin: usize, dest: usize, epoch: usize, expected: u32, found: u32 },
    ServiceShortfall { origin: usize, dest: usize, epoch: usize, served: u32, demand: u32 },
    ServiceExcess { origin: usize, dest: usize, epoch: usize, served: u32, demand: u32 },
    OutsideWindow { origin: usize, dest: usize, epoch: usize, pickup: usize },
    SelfRelocation { zone: usize, epoch: usize },
    FlowBalance { zone: usize, epoch: usize, available: u64, used: u64 },
    RelocationWithBacklog { zone: usize, epoch: usize, backlog: u64 },
}

impl Violation {
    pub fn class(&self) -> &'static str {
        match self {
            Violation::Shape(_) => "shape",
            Violation::MultiplierChoice { .. } => "multiplier-choice",
            Violation::DemandLink { .. } => "demand-link",
            Violation::ServiceShortfall { .. } => "service-shortfall",
            Violation::ServiceExcess { .. } => "service-excess",
            Violation::OutsideWindow { .. } => "outside-window",
            Violation::SelfRelocation { .. } => "self-relocation",
            Violation::FlowBalance { .. } => "flow-balance",
            Violation::RelocationWithBacklog { .. } => "relocation-backlog",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.class(), self)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn classes(&self) -> BTreeSet<&'static str> {
        self.violations.iter().map(Violation::class).collect()
    }
}

/// Check every constraint of the program. Integrality and nonnegativity hold
/// by construction of the unsigned integer arrays.
pub fn validate_solution(inst: &MpcInstance, sol: &MpcSolution) -> ViolationReport {
    let mut out = Vec::new();
    let (z, t_len, k_len) = (inst.zones, inst.horizon, inst.multiplier_count());
    if sol.pricing.dim() != (z, t_len, k_len)
        || sol.relocation.dim() != (z, z, t_len)
        || sol.service.dim() != (z, z, t_len, t_len)
        || sol.demand.dim() != (z, z, t_len)
    {
        out.push(Violation::Shape("solution arrays do not match the instance".into()));
        return ViolationReport { violations: out };
    }

    for i in 0..z {
        for t in 0..t_len {
            match sol.choice(i, t) {
                None => out.push(Violation::MultiplierChoice { zone: i, epoch: t }),
                Some(k) => {
                    for j in 0..z {
                        let expected = inst.demand_options[[k, i, j, t]];
                        let found = sol.demand[[i, j, t]];
                        if expected != found {
                            out.push(Violation::DemandLink { origin: i, dest: j, epoch: t, expected, found });
                        }
                    }
                }
            }
        }
    }

    for i in 0..z {
        for j in 0..z {
            for t0 in 0..t_len {
                let last = inst.window_last(t0);
                let mut served = 0u32;
                for rho in 0..t_len {
                    let x = sol.service[[i, j, t0, rho]];
                    if x == 0 {
                        continue;
                    }
                    if rho < t0 || rho > last {
                        out.push(Violation::OutsideWindow { origin: i, dest: j, epoch: t0, pickup: rho });
                    } else {
                        served += x;
                    }
                }
                let demand = sol.demand[[i, j, t0]];
                if served > demand {
                    out.push(Violation::ServiceExcess { origin: i, dest: j, epoch: t0, served, demand });
                } else if inst.is_hard(t0) && served < demand {
                    out.push(Violation::ServiceShortfall { origin: i, dest: j, epoch: t0, served, demand });
                }
            }
        }
    }

    for i in 0..z {
        for t in 0..t_len {
            if sol.relocation[[i, i, t]] != 0 {
                out.push(Violation::SelfRelocation { zone: i, epoch: t });
            }
        }
    }

    // Vehicles arriving in (zone, epoch) from completed trips and relocations.
    let mut arrivals = Array2::<u64>::zeros((z, t_len));
    for ((i, j, _t0, rho), &x) in sol.service.indexed_iter() {
        let at = rho + inst.lambda(i, j);
        if x > 0 && at < t_len {
            arrivals[[j, at]] += x as u64;
        }
    }
    for ((i, j, t), &x) in sol.relocation.indexed_iter() {
        let at = t + inst.lambda(i, j);
        if x > 0 && i != j && at < t_len {
            arrivals[[j, at]] += x as u64;
        }
    }
    let mut carry = vec![0u64; z];
    for t in 0..t_len {
        for i in 0..z {
            let available = carry[i] + inst.idle[[i, t]] as u64 + arrivals[[i, t]];
            let mut used = 0u64;
            for j in 0..z {
                for t0 in 0..=t {
                    used += sol.service[[i, j, t0, t]] as u64;
                }
                if j != i {
                    used += sol.relocation[[i, j, t]] as u64;
                }
            }
            if used > available {
                out.push(Violation::FlowBalance { zone: i, epoch: t, available, used });
            }
            carry[i] = available.saturating_sub(used);
        }
    }

    for i in 0..z {
        for t in 0..t_len {
            let leaving: u64 = (0..z).filter(|&j| j != i).map(|j| sol.relocation[[i, j, t]] as u64).sum();
            if leaving == 0 {
                continue;
            }
            let backlog = backlog(inst, sol, i, t);
            if backlog > 0 {
                out.push(Violation::RelocationWithBacklog { zone: i, epoch: t, backlog });
            }
        }
    }

    ViolationReport { violations: out }
}

/// Kept demand with an open window at `(i, t)` that is not yet picked up by the end of `t`.
pub fn backlog(inst: &MpcInstance, sol: &MpcSolution, i: usize, t: usize) -> u64 {
    let mut total = 0u64;
    for t0 in inst.window_first_origin(t)..=t {
        for j in 0..inst.zones {
            let served: u64 = (t0..=t).map(|rho| sol.service[[i, j, t0, rho]] as u64).sum();
            total += (sol.demand[[i, j, t0]] as u64).saturating_sub(served);
        }
    }
    total
}

/// Decisions for the epoch being executed now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstEpochActions {
    /// Chosen multiplier index per zone.
    pub multiplier_index: Vec<usize>,
    /// Chosen multiplier value per zone.
    pub multipliers: Vec<f64>,
    /// `relocation[i, j]` vehicles sent from `i` to `j`.
    pub relocation: Array2<u32>,
}

impl FirstEpochActions {
    /// Keep all demand and move nothing.
    pub fn passive(zones: usize) -> Self {
        Self { multiplier_index: vec![0; zones], multipliers: vec![1.0; zones], relocation: Array2::zeros((zones, zones)) }
    }

    pub fn outbound(&self, i: usize) -> u32 {
        self.relocation.row(i).sum()
    }

    pub fn inbound(&self, j: usize) -> u32 {
        self.relocation.column(j).sum()
    }
}

pub fn first_epoch_actions(inst: &MpcInstance, sol: &MpcSolution) -> FirstEpochActions {
    let multiplier_index: Vec<usize> = (0..inst.zones).map(|i| sol.choice(i, 0).unwrap_or(0)).collect();
    FirstEpochActions {
        multipliers: multiplier_index.iter().map(|&k| inst.multipliers[k]).collect(),
        multiplier_index,
        relocation: sol.relocation.slice(ndarray::s![.., .., 0]).to_owned(),
    }
}

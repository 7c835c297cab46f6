use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::TravelMatrix;
use crate::mpc::{
    first_epoch_actions, solve_exact, solve_heuristic, ExactLimits, FirstEpochActions, HeuristicLimits, MpcInstance,
    ServiceGuarantee,
};
use crate::numeric::round_half_up;
use crate::proxy::Proxy;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    None,
    RelocationOnly,
    MpcExact,
    MpcHeuristic,
    MpcClustered,
    Proxy,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::None,
        PolicyKind::RelocationOnly,
        PolicyKind::MpcExact,
        PolicyKind::MpcHeuristic,
        PolicyKind::MpcClustered,
        PolicyKind::Proxy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::None => "none",
            PolicyKind::RelocationOnly => "relocation-only",
            PolicyKind::MpcExact => "mpc-exact",
            PolicyKind::MpcHeuristic => "mpc-heuristic",
            PolicyKind::MpcClustered => "mpc-clustered",
            PolicyKind::Proxy => "proxy",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown policy {s:?}"))
    }
}

/// Maps each zone to a cluster; clusters are numbered `0..count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneMerge {
    pub cluster_of: Vec<usize>,
}

impl ZoneMerge {
    pub fn new(cluster_of: Vec<usize>) -> Result<Self, String> {
        let count = cluster_of.iter().max().map_or(0, |m| m + 1);
        if (0..count).any(|c| !cluster_of.contains(&c)) {
            return Err("cluster ids must cover 0..count without gaps".into());
        }
        Ok(Self { cluster_of })
    }

    pub fn clusters(&self) -> usize {
        self.cluster_of.iter().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.cluster_of.len()).filter(|&i| self.cluster_of[i] == c).collect()
    }

    /// Sum supply and demand over clusters. Travel seconds and epochs between
    /// (and within) clusters are means over member pairs.
    pub fn merge_instance(&self, inst: &MpcInstance) -> Result<MpcInstance, SimError> {
        if self.cluster_of.len() != inst.zones {
            return Err(SimError::Policy(format!("merge map covers {} zones, instance has {}", self.cluster_of.len(), inst.zones)));
        }
        let (c, t) = (self.clusters(), inst.horizon);
        let mut idle = Array2::zeros((c, t));
        let mut base = Array3::zeros((c, c, t));
        for i in 0..inst.zones {
            let ci = self.cluster_of[i];
            for e in 0..t {
                idle[[ci, e]] += inst.idle[[i, e]];
                for j in 0..inst.zones {
                    base[[ci, self.cluster_of[j], e]] += inst.base_demand[[i, j, e]];
                }
            }
        }
        let mut seconds = Array2::zeros((c, c));
        let mut epochs = Array2::ones((c, c));
        for a in 0..c {
            for b in 0..c {
                let pairs: Vec<(usize, usize)> =
                    self.members(a).into_iter().flat_map(|i| self.members(b).into_iter().map(move |j| (i, j))).collect();
                let n = pairs.len() as f64;
                seconds[[a, b]] = pairs.iter().map(|&p| inst.travel_seconds[p]).sum::<f64>() / n;
                let mean_epochs = pairs.iter().map(|&p| inst.travel_epochs[p] as f64).sum::<f64>() / n;
                epochs[[a, b]] = (round_half_up(mean_epochs) as u32).max(1);
            }
        }
        let mut merged = MpcInstance::new(
            idle,
            base,
            inst.multipliers.clone(),
            &TravelMatrix { seconds, epochs },
            inst.patience,
            inst.rideshare,
            inst.weights,
            inst.big_m,
        )
        .map_err(|e| SimError::Policy(e.to_string()))?;
        merged.service = inst.service;
        Ok(merged)
    }

    /// Spread cluster-level actions back over zones. Vehicles leave the
    /// members with the most idle vehicles first and are dealt round-robin to
    /// destination members in order of first-epoch demand.
    pub fn expand_actions(&self, inst: &MpcInstance, coarse: &FirstEpochActions) -> FirstEpochActions {
        let z = inst.zones;
        let index: Vec<usize> = (0..z).map(|i| coarse.multiplier_index[self.cluster_of[i]]).collect();
        let mut relocation = Array2::<u32>::zeros((z, z));
        let mut spare: Vec<u32> = inst.idle.column(0).to_vec();
        let outbound = |j: usize| -> u32 { (0..z).map(|k| inst.base_demand[[j, k, 0]]).sum() };
        for a in 0..self.clusters() {
            for b in 0..self.clusters() {
                let mut count = coarse.relocation[[a, b]];
                if a == b || count == 0 {
                    continue;
                }
                let mut dests = self.members(b);
                dests.sort_by_key(|&j| (std::cmp::Reverse(outbound(j)), j));
                let mut next = 0;
                while count > 0 {
                    let Some(src) = self.members(a).into_iter().filter(|&i| spare[i] > 0).max_by_key(|&i| (spare[i], std::cmp::Reverse(i)))
                    else {
                        break;
                    };
                    spare[src] -= 1;
                    relocation[[src, dests[next % dests.len()]]] += 1;
                    next += 1;
                    count -= 1;
                }
            }
        }
        FirstEpochActions { multipliers: index.iter().map(|&k| inst.multipliers[k]).collect(), multiplier_index: index, relocation }
    }
}

/// A decision rule for the start of every epoch.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Serve at base price, never relocate.
    None,
    /// Keep every request and relocate by the MPC with a single multiplier of 1.
    RelocationOnly(HeuristicLimits),
    MpcExact(ExactLimits),
    MpcHeuristic(HeuristicLimits),
    /// Heuristic MPC on a coarser zone partition.
    MpcClustered { merge: ZoneMerge, limits: HeuristicLimits },
    Proxy(Box<Proxy>),
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::None => PolicyKind::None,
            Policy::RelocationOnly(_) => PolicyKind::RelocationOnly,
            Policy::MpcExact(_) => PolicyKind::MpcExact,
            Policy::MpcHeuristic(_) => PolicyKind::MpcHeuristic,
            Policy::MpcClustered { .. } => PolicyKind::MpcClustered,
            Policy::Proxy(_) => PolicyKind::Proxy,
        }
    }

    /// First-epoch multipliers and relocations for `inst`.
    pub fn decide(&self, inst: &MpcInstance, rng: &mut Stream) -> Result<FirstEpochActions, SimError> {
        match self {
            Policy::None => Ok(FirstEpochActions::passive(inst.zones)),
            Policy::RelocationOnly(limits) => {
                let relaxed = inst.with_multipliers(vec![1.0], ServiceGuarantee::Soft);
                let sol = solve_heuristic(&relaxed, *limits);
                Ok(first_epoch_actions(&relaxed, &sol))
            }
            Policy::MpcExact(limits) => Ok(first_epoch_actions(inst, &solve_exact(inst, *limits))),
            Policy::MpcHeuristic(limits) => Ok(first_epoch_actions(inst, &solve_heuristic(inst, *limits))),
            Policy::MpcClustered { merge, limits } => {
                let coarse = merge.merge_instance(inst)?;
                let actions = first_epoch_actions(&coarse, &solve_heuristic(&coarse, *limits));
                Ok(merge.expand_actions(inst, &actions))
            }
            Policy::Proxy(proxy) => Ok(proxy.decide(inst, rng).map_err(|e| SimError::Policy(e.to_string()))?.actions),
        }
    }
}

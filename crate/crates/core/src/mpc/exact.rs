//! Exact branch and bound for small instances.
//!
//! The search walks epochs in order and, inside an epoch, zones in order. At
//! each `(zone, epoch)` it picks a multiplier, then how many vehicles pick up
//! each open request bucket, then (only if the zone has no backlog left) how
//! many of the remaining idle vehicles relocate to each reachable zone.
//! Leftover vehicles carry to the next epoch.

use std::time::{Duration, Instant};

use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::heuristic::{solve_heuristic, HeuristicLimits};
use super::{recompute_objective, MpcInstance, MpcSolution, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactLimits {
    /// Search nodes (zone-epoch visits) before giving up on a proof.
    pub nodes: u64,
    /// Seed the incumbent with the heuristic.
    pub warm_start: bool,
    /// Optional wall-clock cap on top of the node count. Makes runs machine-dependent.
    #[serde(default)]
    pub wall_clock: Option<Duration>,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self { nodes: 20_000_000, warm_start: true, wall_clock: None }
    }
}

pub fn solve_exact(inst: &MpcInstance, limits: ExactLimits) -> MpcSolution {
    let (z, t) = (inst.zones, inst.horizon);
    // Best possible gain of each zone's demand in its own epoch, over all multipliers.
    let zone_gain = Array2::from_shape_fn((z, t), |(i, e)| {
        (0..z)
            .map(|j| {
                let most = (0..inst.multiplier_count()).map(|k| inst.demand_options[[k, i, j, e]]).max().unwrap_or(0);
                inst.service_gain(i, j, e, e) * most as f64
            })
            .sum::<f64>()
    });
    let mut later_gain = vec![0.0; t + 1];
    for e in (0..t).rev() {
        later_gain[e] = later_gain[e + 1] + zone_gain.column(e).sum();
    }

    let mut dfs = Dfs {
        inst,
        choice: Array2::zeros((z, t)),
        rem: Array3::zeros((z, z, t)),
        service: Array4::zeros((z, z, t, t)),
        relocation: Array3::zeros((z, z, t)),
        arrivals: Array2::zeros((z, t)),
        carry: vec![0; z],
        obj: 0.0,
        best: None,
        best_obj: f64::NEG_INFINITY,
        nodes: 0,
        limit: limits.nodes,
        deadline: limits.wall_clock.map(|d| Instant::now() + d),
        exhausted: false,
        zone_gain,
        later_gain,
    };
    if limits.warm_start {
        let h = solve_heuristic(inst, HeuristicLimits::default());
        if h.status != SolveStatus::InfeasibleReported {
            dfs.best_obj = h.objective;
            dfs.best = Some(h);
        }
    }
    dfs.visit(0, 0);

    let exhausted = dfs.exhausted;
    match dfs.best {
        Some(mut sol) => {
            sol.status = if exhausted { SolveStatus::BudgetFeasible } else { SolveStatus::Optimal };
            sol.objective = recompute_objective(inst, &sol);
            sol
        }
        None => {
            let last = inst.multiplier_count() - 1;
            let mut sol = MpcSolution::with_choices(inst, &Array2::from_elem((z, t), last));
            sol.status = SolveStatus::InfeasibleReported;
            sol
        }
    }
}

struct Dfs<'a> {
    inst: &'a MpcInstance,
    choice: Array2<usize>,
    /// Kept demand not yet picked up, by origin, destination and request epoch.
    rem: Array3<u32>,
    service: Array4<u32>,
    relocation: Array3<u32>,
    arrivals: Array2<u32>,
    /// Idle vehicles entering the current epoch per zone, excluding fresh supply.
    carry: Vec<u32>,
    obj: f64,
    best: Option<MpcSolution>,
    best_obj: f64,
    nodes: u64,
    limit: u64,
    deadline: Option<Instant>,
    exhausted: bool,
    zone_gain: Array2<f64>,
    later_gain: Vec<f64>,
}

impl Dfs<'_> {
    fn visit(&mut self, e: usize, i: usize) {
        if self.exhausted {
            return;
        }
        let inst = self.inst;
        if e == inst.horizon {
            self.leaf();
            return;
        }
        if i == inst.zones {
            self.visit(e + 1, 0);
            return;
        }
        self.nodes += 1;
        let late = self.nodes.is_multiple_of(1024) && self.deadline.is_some_and(|d| Instant::now() >= d);
        if self.nodes > self.limit || late {
            self.exhausted = true;
            return;
        }
        if self.best.is_some() && self.obj + self.bound(e, i) <= self.best_obj + 1e-9 {
            return;
        }
        let avail = self.carry[i] + inst.idle[[i, e]] + self.arrivals[[i, e]];
        for k in 0..inst.multiplier_count() {
            self.choice[[i, e]] = k;
            for j in 0..inst.zones {
                self.rem[[i, j, e]] = inst.demand_options[[k, i, j, e]];
            }
            let buckets: Vec<(usize, usize)> = (inst.window_first_origin(e)..=e)
                .flat_map(|t0| (0..inst.zones).map(move |j| (j, t0)))
                .filter(|&(j, t0)| self.rem[[i, j, t0]] > 0)
                .collect();
            self.pickups(e, i, &buckets, 0, avail);
            for j in 0..inst.zones {
                self.rem[[i, j, e]] = 0;
            }
            if self.exhausted {
                return;
            }
        }
        self.choice[[i, e]] = 0;
    }

    fn pickups(&mut self, e: usize, i: usize, buckets: &[(usize, usize)], idx: usize, left: u32) {
        if self.exhausted {
            return;
        }
        let inst = self.inst;
        let Some(&(j, t0)) = buckets.get(idx) else {
            self.relocations(e, i, left);
            return;
        };
        let r = self.rem[[i, j, t0]];
        let forced = inst.is_hard(t0) && inst.window_last(t0) == e;
        let (lo, hi) = if forced {
            if r > left {
                return;
            }
            (r, r)
        } else {
            (0, r.min(left))
        };
        let gain = inst.service_gain(i, j, t0, e);
        let arrive = e + inst.lambda(i, j);
        for x in (lo..=hi).rev() {
            self.service[[i, j, t0, e]] = x;
            self.rem[[i, j, t0]] = r - x;
            self.obj += gain * x as f64;
            if arrive < inst.horizon {
                self.arrivals[[j, arrive]] += x;
            }
            self.pickups(e, i, buckets, idx + 1, left - x);
            if arrive < inst.horizon {
                self.arrivals[[j, arrive]] -= x;
            }
            self.obj -= gain * x as f64;
        }
        self.service[[i, j, t0, e]] = 0;
        self.rem[[i, j, t0]] = r;
    }

    fn relocations(&mut self, e: usize, i: usize, left: u32) {
        let inst = self.inst;
        let backlog: u32 =
            (inst.window_first_origin(e)..=e).flat_map(|t0| (0..inst.zones).map(move |j| (j, t0))).map(|(j, t0)| self.rem[[i, j, t0]]).sum();
        // Relocations landing after the horizon only cost.
        let dests: Vec<usize> = (0..inst.zones).filter(|&j| j != i && e + inst.lambda(i, j) < inst.horizon).collect();
        if backlog > 0 || left == 0 || dests.is_empty() {
            self.finish(e, i, left);
        } else {
            self.spread(e, i, &dests, 0, left);
        }
    }

    fn spread(&mut self, e: usize, i: usize, dests: &[usize], idx: usize, left: u32) {
        if self.exhausted {
            return;
        }
        let Some(&j) = dests.get(idx) else {
            self.finish(e, i, left);
            return;
        };
        let inst = self.inst;
        let cost = inst.relocation_cost(i, j, e);
        let arrive = e + inst.lambda(i, j);
        for x in 0..=left {
            self.relocation[[i, j, e]] = x;
            self.obj -= cost * x as f64;
            self.arrivals[[j, arrive]] += x;
            self.spread(e, i, dests, idx + 1, left - x);
            self.arrivals[[j, arrive]] -= x;
            self.obj += cost * x as f64;
        }
        self.relocation[[i, j, e]] = 0;
    }

    fn finish(&mut self, e: usize, i: usize, left: u32) {
        let old = self.carry[i];
        self.carry[i] = left;
        self.visit(e, i + 1);
        self.carry[i] = old;
    }

    /// Upper bound on the objective still obtainable from `(zone i, epoch e)`
    /// on: every open or future request is served at its earliest possible
    /// pickup under its largest multiplier, and relocations are free.
    fn bound(&self, e: usize, i: usize) -> f64 {
        let inst = self.inst;
        let mut b = self.later_gain[e + 1];
        for zone in i..inst.zones {
            b += self.zone_gain[[zone, e]];
        }
        for zone in 0..inst.zones {
            // Zones already handled this epoch can only pick up from e + 1.
            let at = if zone < i { e + 1 } else { e };
            for t0 in inst.window_first_origin(e)..=e {
                if at > inst.window_last(t0) {
                    continue;
                }
                for j in 0..inst.zones {
                    let r = self.rem[[zone, j, t0]];
                    if r > 0 {
                        b += inst.service_gain(zone, j, t0, at) * r as f64;
                    }
                }
            }
        }
        b
    }

    fn leaf(&mut self) {
        if self.best.is_some() && self.obj <= self.best_obj + 1e-12 {
            return;
        }
        let inst = self.inst;
        let mut sol = MpcSolution::with_choices(inst, &self.choice);
        sol.service.assign(&self.service);
        sol.relocation.assign(&self.relocation);
        sol.objective = self.obj;
        self.best_obj = self.obj;
        self.best = Some(sol);
    }
}

//! Budgeted solver for instances too large for the exact search.
//!
//! A plan is a multiplier per `(zone, epoch)` plus requested relocations.
//! Plans are scored by a forward pass that serves open requests greedily,
//! earliest deadline first, and only sends relocations a zone can afford
//! once its backlog is clear. Construction starts with every multiplier at
//! the top and lowers demand (or pulls vehicles from spare zones) where hard
//! requests would go unserved; local search then tries single-step changes.

use std::time::{Duration, Instant};

use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::{recompute_objective, MpcInstance, MpcSolution, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicLimits {
    /// Plan evaluations (forward passes) allowed.
    pub evaluations: usize,
    /// Optional wall-clock cap on top of the evaluation count.
    pub wall_clock: Option<Duration>,
}

impl Default for HeuristicLimits {
    fn default() -> Self {
        Self { evaluations: 4000, wall_clock: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Plan {
    choice: Array2<usize>,
    relocation: Array3<u32>,
    /// Destination served first when a zone cannot serve every request.
    rotation: Array2<usize>,
}

#[derive(Debug, Clone)]
struct Deficit {
    zone: usize,
    epoch: usize,
    amount: u32,
}

#[derive(Debug, Clone)]
struct Outcome {
    objective: f64,
    deficits: Vec<Deficit>,
    /// Idle vehicles left in each `(zone, epoch)` after pickups and relocations.
    spare: Array2<u32>,
    backlog_free: Array2<bool>,
    service: Array4<u32>,
    relocation: Array3<u32>,
}

impl Outcome {
    fn unmet(&self) -> u64 {
        self.deficits.iter().map(|d| d.amount as u64).sum()
    }

    fn feasible(&self) -> bool {
        self.deficits.is_empty()
    }
}

struct Search<'a> {
    inst: &'a MpcInstance,
    used: usize,
    limits: HeuristicLimits,
    started: Instant,
}

impl Search<'_> {
    fn spent(&self) -> bool {
        self.used >= self.limits.evaluations || self.limits.wall_clock.is_some_and(|w| self.started.elapsed() >= w)
    }

    fn evaluate(&mut self, plan: &Plan) -> Outcome {
        self.used += 1;
        simulate(self.inst, plan)
    }
}

/// Forward pass over epochs and zones.
fn simulate(inst: &MpcInstance, plan: &Plan) -> Outcome {
    let (z, t) = (inst.zones, inst.horizon);
    let mut rem = Array3::<u32>::zeros((z, z, t));
    let mut arrivals = Array2::<u32>::zeros((z, t));
    let mut carry = vec![0u32; z];
    let mut out = Outcome {
        objective: 0.0,
        deficits: Vec::new(),
        spare: Array2::zeros((z, t)),
        backlog_free: Array2::from_elem((z, t), true),
        service: Array4::zeros((z, z, t, t)),
        relocation: Array3::zeros((z, z, t)),
    };
    for e in 0..t {
        for i in 0..z {
            let k = plan.choice[[i, e]];
            for j in 0..z {
                rem[[i, j, e]] = inst.demand_options[[k, i, j, e]];
            }
            let mut avail = carry[i] + inst.idle[[i, e]] + arrivals[[i, e]];
            let first = inst.window_first_origin(e);
            for t0 in first..=e {
                for jj in 0..z {
                    let j = (jj + plan.rotation[[i, e]]) % z;
                    let x = rem[[i, j, t0]].min(avail);
                    if x == 0 {
                        continue;
                    }
                    rem[[i, j, t0]] -= x;
                    avail -= x;
                    out.service[[i, j, t0, e]] = x;
                    out.objective += inst.service_gain(i, j, t0, e) * x as f64;
                    let at = e + inst.lambda(i, j);
                    if at < t {
                        arrivals[[j, at]] += x;
                    }
                }
            }
            let mut backlog = 0u32;
            for t0 in first..=e {
                let open: u32 = (0..z).map(|j| rem[[i, j, t0]]).sum();
                backlog += open;
                if open > 0 && inst.window_last(t0) == e && inst.is_hard(t0) {
                    out.deficits.push(Deficit { zone: i, epoch: t0, amount: open });
                }
            }
            out.backlog_free[[i, e]] = backlog == 0;
            if backlog == 0 {
                for j in 0..z {
                    let want = plan.relocation[[i, j, e]];
                    let at = e + inst.lambda(i, j);
                    if j == i || want == 0 || at >= t {
                        continue;
                    }
                    let x = want.min(avail);
                    if x == 0 {
                        break;
                    }
                    avail -= x;
                    out.relocation[[i, j, e]] = x;
                    out.objective -= inst.relocation_cost(i, j, e) * x as f64;
                    arrivals[[j, at]] += x;
                }
            }
            out.spare[[i, e]] = avail;
            carry[i] = avail;
        }
    }
    out
}

fn to_solution(inst: &MpcInstance, plan: &Plan, outcome: &Outcome, status: SolveStatus) -> MpcSolution {
    let mut sol = MpcSolution::with_choices(inst, &plan.choice);
    sol.service.assign(&outcome.service);
    sol.relocation.assign(&outcome.relocation);
    sol.objective = recompute_objective(inst, &sol);
    sol.status = status;
    sol
}

/// Try to cover one deficit by relocating spare vehicles from another zone
/// early enough. Returns the improved outcome if the total unmet demand drops.
fn repair(search: &mut Search, plan: &mut Plan, current: &Outcome, d: &Deficit) -> Option<Outcome> {
    let inst = search.inst;
    let deadline = inst.window_last(d.epoch);
    // Donors ranked by what one moved vehicle is worth on arrival, net of the move.
    let mut donors: Vec<(f64, usize, usize)> = Vec::new();
    for src in (0..inst.zones).filter(|&s| s != d.zone) {
        let lambda = inst.lambda(src, d.zone);
        for tau in 0..inst.horizon {
            if tau + lambda > deadline || current.spare[[src, tau]] == 0 || !current.backlog_free[[src, tau]] {
                continue;
            }
            let pickup = (tau + lambda).max(d.epoch);
            let value = inst.service_gain(d.zone, d.zone, d.epoch, pickup) - inst.relocation_cost(src, d.zone, tau);
            donors.push((value, src, tau));
        }
    }
    donors.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, src, tau) in donors {
        if search.spent() {
            break;
        }
        let units = d.amount.min(current.spare[[src, tau]]);
        plan.relocation[[src, d.zone, tau]] += units;
        let next = search.evaluate(plan);
        if next.unmet() < current.unmet() {
            plan.relocation.assign(&next.relocation);
            return Some(next);
        }
        plan.relocation[[src, d.zone, tau]] -= units;
    }
    None
}

/// Lower multipliers and add relocations until every hard request is served.
fn construct(search: &mut Search, mut plan: Plan) -> Option<(Plan, Outcome)> {
    let inst = search.inst;
    let last = inst.multiplier_count() - 1;
    let mut current = search.evaluate(&plan);
    while !current.feasible() {
        if search.spent() {
            return None;
        }
        let worst = current
            .deficits
            .iter()
            .max_by(|a, b| a.amount.cmp(&b.amount).then(b.epoch.cmp(&a.epoch)).then(b.zone.cmp(&a.zone)))
            .cloned()
            .expect("infeasible outcome has a deficit");
        if let Some(next) = repair(search, &mut plan, &current, &worst) {
            current = next;
            continue;
        }
        if plan.choice[[worst.zone, worst.epoch]] >= last {
            // Nothing left to lower here: price out everything still above the floor.
            let Some(cell) = plan.choice.iter_mut().find(|k| **k < last) else { return None };
            *cell += 1;
        } else {
            plan.choice[[worst.zone, worst.epoch]] += 1;
        }
        current = search.evaluate(&plan);
    }
    Some((plan, current))
}

/// Single-step neighbours of a plan, in a fixed order.
fn neighbours(inst: &MpcInstance, plan: &Plan, outcome: &Outcome) -> Vec<Plan> {
    let (z, t, last) = (inst.zones, inst.horizon, inst.multiplier_count() - 1);
    let mut out = Vec::new();
    for i in 0..z {
        for e in 0..t {
            let k = plan.choice[[i, e]];
            if k > 0 {
                let mut p = plan.clone();
                p.choice[[i, e]] = k - 1;
                out.push(p);
            }
            if k < last {
                let mut p = plan.clone();
                p.choice[[i, e]] = k + 1;
                out.push(p);
            }
        }
    }
    // Raise one multiplier and lower another in the same zone or epoch.
    for i in 0..z {
        for e in 0..t {
            if plan.choice[[i, e]] == 0 {
                continue;
            }
            for i2 in 0..z {
                for e2 in 0..t {
                    if (i2 != i && e2 != e) || (i2 == i && e2 == e) || plan.choice[[i2, e2]] >= last {
                        continue;
                    }
                    let mut p = plan.clone();
                    p.choice[[i, e]] -= 1;
                    p.choice[[i2, e2]] += 1;
                    out.push(p);
                }
            }
        }
    }
    if z > 1 {
        for i in 0..z {
            for e in 0..t {
                if outcome.spare[[i, e]] == 0 {
                    let mut p = plan.clone();
                    p.rotation[[i, e]] = (p.rotation[[i, e]] + 1) % z;
                    out.push(p);
                }
            }
        }
    }
    for i in 0..z {
        for e in 0..t {
            let spare = outcome.spare[[i, e]] > 0 && outcome.backlog_free[[i, e]];
            for j in (0..z).filter(|&j| j != i && e + inst.lambda(i, j) < t) {
                let r = plan.relocation[[i, j, e]];
                if spare {
                    let mut p = plan.clone();
                    p.relocation[[i, j, e]] += 1;
                    out.push(p);
                }
                if r > 0 {
                    let mut p = plan.clone();
                    p.relocation[[i, j, e]] -= 1;
                    out.push(p);
                    for j2 in (0..z).filter(|&j2| j2 != i && j2 != j && e + inst.lambda(i, j2) < t) {
                        let mut p = plan.clone();
                        p.relocation[[i, j, e]] -= 1;
                        p.relocation[[i, j2, e]] += 1;
                        out.push(p);
                    }
                    if e + 1 + inst.lambda(i, j) < t {
                        let mut p = plan.clone();
                        p.relocation[[i, j, e]] -= 1;
                        p.relocation[[i, j, e + 1]] += 1;
                        out.push(p);
                    }
                    if e > 0 {
                        let mut p = plan.clone();
                        p.relocation[[i, j, e]] -= 1;
                        p.relocation[[i, j, e - 1]] += 1;
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

pub fn solve_heuristic(inst: &MpcInstance, limits: HeuristicLimits) -> MpcSolution {
    let (z, t) = (inst.zones, inst.horizon);
    let last = inst.multiplier_count() - 1;
    let mut search = Search { inst, used: 0, limits, started: Instant::now() };
    let start = Plan { choice: Array2::zeros((z, t)), relocation: Array3::zeros((z, z, t)), rotation: Array2::zeros((z, t)) };

    let Some((mut plan, mut best)) = construct(&mut search, start) else {
        // Fallback: the lowest multiplier everywhere, no relocations.
        let floor =
            Plan { choice: Array2::from_elem((z, t), last), relocation: Array3::zeros((z, z, t)), rotation: Array2::zeros((z, t)) };
        let outcome = simulate(inst, &floor);
        let status = if outcome.feasible() { SolveStatus::BudgetFeasible } else { SolveStatus::InfeasibleReported };
        return to_solution(inst, &floor, &outcome, status);
    };
    plan.relocation.assign(&best.relocation);

    'improve: while !search.spent() {
        for candidate in neighbours(inst, &plan, &best) {
            if search.spent() {
                break 'improve;
            }
            let mut outcome = search.evaluate(&candidate);
            let mut candidate = candidate;
            if !outcome.feasible() {
                // A raised multiplier may need vehicles pulled in to stay feasible.
                match construct_repair_only(&mut search, candidate, outcome) {
                    Some((p, o)) => {
                        candidate = p;
                        outcome = o;
                    }
                    None => continue,
                }
            }
            if outcome.objective > best.objective + 1e-9 {
                plan = candidate;
                plan.relocation.assign(&outcome.relocation);
                best = outcome;
                continue 'improve;
            }
        }
        break;
    }
    to_solution(inst, &plan, &best, SolveStatus::BudgetFeasible)
}

/// Relocation-only repair with a small step cap, used inside local search.
fn construct_repair_only(search: &mut Search, mut plan: Plan, mut current: Outcome) -> Option<(Plan, Outcome)> {
    for _ in 0..4 {
        if current.feasible() {
            return Some((plan, current));
        }
        if search.spent() {
            return None;
        }
        let worst = current.deficits.iter().max_by_key(|d| d.amount).cloned()?;
        current = repair(search, &mut plan, &current, &worst)?;
    }
    current.feasible().then_some((plan, current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TravelMatrix;
    use crate::mpc::{validate_solution, ServiceGuarantee};
    use crate::weights::WeightParams;
    use ndarray::Array3;

    fn inst(z: usize, t: usize, s: usize) -> MpcInstance {
        let travel = TravelMatrix {
            seconds: Array2::from_shape_fn((z, z), |(i, j)| if i == j { 120.0 } else { 420.0 }),
            epochs: Array2::from_elem((z, z), 1),
        };
        MpcInstance::new(
            Array2::zeros((z, t)),
            Array3::zeros((z, z, t)),
            vec![1.0, 0.75, 0.5, 0.25, 0.0],
            &travel,
            s,
            1.5,
            WeightParams { service_base: 0.5, service_decay: 0.75, relocation_scale: 0.001 },
            30,
        )
        .unwrap()
    }

    fn refresh(m: &mut MpcInstance) {
        m.demand_options = crate::mpc::instance::scale_demand(&m.base_demand, &m.multipliers);
    }

    #[test]
    fn zero_demand_gives_zero_solution() {
        let mut m = inst(3, 4, 2);
        m.idle.fill(2);
        let sol = solve_heuristic(&m, HeuristicLimits::default());
        assert!(validate_solution(&m, &sol).is_empty());
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.service.sum() + sol.relocation.sum(), 0);
    }

    #[test]
    fn ample_supply_keeps_all_demand_and_serves_at_once() {
        let mut m = inst(3, 4, 2);
        m.idle.column_mut(0).fill(100);
        m.base_demand.fill(1);
        refresh(&mut m);
        let sol = solve_heuristic(&m, HeuristicLimits::default());
        assert!(validate_solution(&m, &sol).is_empty());
        for i in 0..3 {
            for e in 0..4 {
                assert_eq!(sol.choice(i, e), Some(0));
            }
        }
        for ((_, _, t0, rho), &x) in sol.service.indexed_iter() {
            if x > 0 {
                assert_eq!(t0, rho);
            }
        }
        assert_eq!(sol.relocation.sum(), 0);
    }

    #[test]
    fn shortage_is_always_feasible() {
        let mut m = inst(4, 5, 2);
        m.idle[[0, 0]] = 1;
        m.base_demand.fill(3);
        refresh(&mut m);
        let sol = solve_heuristic(&m, HeuristicLimits { evaluations: 200, wall_clock: None });
        assert!(validate_solution(&m, &sol).is_empty());
        assert!(sol.objective >= 0.0);
    }

    #[test]
    fn pulls_spare_vehicles_to_demand() {
        let mut m = inst(2, 3, 2);
        m.idle[[0, 0]] = 3;
        m.base_demand[[1, 0, 1]] = 2;
        refresh(&mut m);
        let sol = solve_heuristic(&m, HeuristicLimits::default());
        assert!(validate_solution(&m, &sol).is_empty());
        // Moving in epoch 1 and picking up late beats the dearer early move.
        assert_eq!(sol.relocation[[0, 1, 1]], 2);
        assert_eq!(sol.choice(1, 1), Some(0));
    }

    #[test]
    fn soft_service_needs_no_pricing() {
        let mut m = inst(2, 3, 1).with_multipliers(vec![1.0], ServiceGuarantee::Soft);
        m.base_demand.fill(4);
        refresh(&mut m);
        m.idle[[0, 0]] = 1;
        let sol = solve_heuristic(&m, HeuristicLimits::default());
        assert!(validate_solution(&m, &sol).is_empty());
        assert!(sol.objective > 0.0);
    }
}

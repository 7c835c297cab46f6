//! Memoised exhaustive search over every decision of the program. No bounds,
//! no forced moves: every multiplier, pickup split and relocation split is
//! tried, and hard-service and backlog rules are checked after the fact.
//! Relocations that land after the horizon are skipped since they only cost.

use std::collections::HashMap;

use ndarray::{Array2, Array3};
use ridehail::mpc::{MpcInstance, ServiceGuarantee};

pub fn exhaustive_optimum(inst: &MpcInstance) -> f64 {
    let mut o = Oracle { inst, memo: HashMap::new() };
    let (z, t) = (inst.zones, inst.horizon);
    o.value(0, 0, vec![0; z], Array2::zeros((z, t)), Array3::zeros((z, z, t)))
}

struct Oracle<'a> {
    inst: &'a MpcInstance,
    memo: HashMap<Vec<u64>, f64>,
}

fn weight(inst: &MpcInstance, t0: usize, rho: usize) -> f64 {
    // Independent of the library's weight helpers: a^(t0+1) * b^(rho-t0) * W.
    inst.weights.service_base.powi(t0 as i32 + 1) * inst.weights.service_decay.powi((rho - t0) as i32) * inst.rideshare
}

fn cost(inst: &MpcInstance, i: usize, j: usize, e: usize) -> f64 {
    inst.weights.relocation_scale * inst.weights.service_base.powi(e as i32 + 1) * inst.travel_seconds[[i, j]]
}

fn first_open(inst: &MpcInstance, e: usize) -> usize {
    (e + 1).saturating_sub(inst.patience)
}

fn last_pickup(inst: &MpcInstance, t0: usize) -> usize {
    (t0 + inst.patience - 1).min(inst.horizon - 1)
}

fn hard(inst: &MpcInstance, t0: usize) -> bool {
    inst.service == ServiceGuarantee::Hard && t0 < inst.horizon + 1 - inst.patience
}

impl Oracle<'_> {
    fn value(&mut self, e: usize, i: usize, carry: Vec<u32>, arrivals: Array2<u32>, mut rem: Array3<u32>) -> f64 {
        let inst = self.inst;
        let (z, t) = (inst.zones, inst.horizon);
        if e == t {
            return 0.0;
        }
        if i == z {
            for t0 in 0..=e {
                if last_pickup(inst, t0) == e {
                    for a in 0..z {
                        for b in 0..z {
                            rem[[a, b, t0]] = 0;
                        }
                    }
                }
            }
            return self.value(e + 1, 0, carry, arrivals, rem);
        }
        let mut key = vec![e as u64, i as u64];
        key.extend(carry.iter().map(|&c| c as u64));
        key.extend(arrivals.iter().map(|&c| c as u64));
        key.extend(rem.iter().map(|&c| c as u64));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let avail = carry[i] + inst.idle[[i, e]] + arrivals[[i, e]];
        let mut best = f64::NEG_INFINITY;
        for k in 0..inst.multipliers.len() {
            let mut r = rem.clone();
            for j in 0..z {
                r[[i, j, e]] = inst.demand_options[[k, i, j, e]];
            }
            let buckets: Vec<(usize, usize)> = (first_open(inst, e)..=e).flat_map(|t0| (0..z).map(move |j| (j, t0))).collect();
            let mut splits = Vec::new();
            enumerate(&buckets.iter().map(|&(j, t0)| r[[i, j, t0]]).collect::<Vec<_>>(), avail, &mut Vec::new(), &mut splits);
            for split in splits {
                let mut r2 = r.clone();
                let mut arr = arrivals.clone();
                let mut gain = 0.0;
                let mut used = 0;
                for (&(j, t0), &x) in buckets.iter().zip(&split) {
                    r2[[i, j, t0]] -= x;
                    used += x;
                    gain += weight(inst, t0, e) * x as f64;
                    let at = e + inst.travel_epochs[[i, j]] as usize;
                    if at < t {
                        arr[[j, at]] += x;
                    }
                }
                let violates_hard = (first_open(inst, e)..=e)
                    .any(|t0| last_pickup(inst, t0) == e && hard(inst, t0) && (0..z).any(|j| r2[[i, j, t0]] > 0));
                if violates_hard {
                    continue;
                }
                let backlog: u32 = buckets.iter().map(|&(j, t0)| r2[[i, j, t0]]).sum();
                let left = avail - used;
                let dests: Vec<usize> =
                    (0..z).filter(|&j| j != i && e + (inst.travel_epochs[[i, j]] as usize) < t).collect();
                let mut moves = Vec::new();
                if backlog == 0 {
                    enumerate(&vec![left; dests.len()], left, &mut Vec::new(), &mut moves);
                } else {
                    moves.push(vec![0; dests.len()]);
                }
                for mv in moves {
                    let mut arr2 = arr.clone();
                    let mut g = gain;
                    let mut sent = 0;
                    for (&j, &x) in dests.iter().zip(&mv) {
                        sent += x;
                        g -= cost(inst, i, j, e) * x as f64;
                        arr2[[j, e + inst.travel_epochs[[i, j]] as usize]] += x;
                    }
                    let mut c2 = carry.clone();
                    c2[i] = left - sent;
                    let v = g + self.value(e, i + 1, c2, arr2, r2.clone());
                    if v > best {
                        best = v;
                    }
                }
            }
        }
        self.memo.insert(key, best);
        best
    }
}

/// All vectors `x` with `x[n] <= caps[n]` and `sum(x) <= total`.
fn enumerate(caps: &[u32], total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let n = prefix.len();
    if n == caps.len() {
        out.push(prefix.clone());
        return;
    }
    for x in 0..=caps[n].min(total) {
        prefix.push(x);
        enumerate(caps, total - x, prefix, out);
        prefix.pop();
    }
}

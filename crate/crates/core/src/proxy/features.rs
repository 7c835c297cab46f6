//! Inputs for the learned policy.
//!
//! Flat layout, in order:
//! idle supply `V[i, t]`, outbound baseline demand `sum_j D0[i, j, t]`,
//! inbound baseline demand `sum_i D0[i, j, t]` (each zone-major, `Z*T`),
//! mean travel epochs out of each zone (`Z`), first-epoch gaps
//! `V[i, 0] - sum_j D^k[i, j, 0]` (`Z*K`), cumulative supply over cumulative
//! demand (`Z*T`) with a flag where demand is still zero (`Z*T`), then the
//! first-epoch baseline demand matrix (`Z*Z`).
//!
//! The per-zone layout holds the same quantities for one zone plus two
//! fleet-wide averages, so one model can be applied to every zone.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::mpc::MpcInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

pub fn feature_len(zones: usize, horizon: usize, multipliers: usize) -> usize {
    zones * (5 * horizon + 1 + multipliers + zones)
}

pub fn zone_feature_len(horizon: usize, multipliers: usize) -> usize {
    5 * horizon + 1 + multipliers + 2
}

struct Summary {
    outbound: Array2<f64>,
    inbound: Array2<f64>,
    mean_lambda: Vec<f64>,
    gaps: Array2<f64>,
    ratio: Array2<f64>,
    flag: Array2<f64>,
}

fn summarise(inst: &MpcInstance) -> Summary {
    let (z, t, k) = (inst.zones, inst.horizon, inst.multiplier_count());
    let d0 = &inst.base_demand;
    let outbound = Array2::from_shape_fn((z, t), |(i, e)| (0..z).map(|j| d0[[i, j, e]] as f64).sum());
    let inbound = Array2::from_shape_fn((z, t), |(j, e)| (0..z).map(|i| d0[[i, j, e]] as f64).sum());
    let mean_lambda = (0..z).map(|i| inst.travel_epochs.row(i).iter().map(|&l| l as f64).sum::<f64>() / z as f64).collect();
    let gaps = Array2::from_shape_fn((z, k), |(i, kk)| {
        inst.idle[[i, 0]] as f64 - (0..z).map(|j| inst.demand_options[[kk, i, j, 0]] as f64).sum::<f64>()
    });
    let mut ratio = Array2::zeros((z, t));
    let mut flag = Array2::zeros((z, t));
    for i in 0..z {
        let (mut supply, mut demand) = (0.0, 0.0);
        for e in 0..t {
            supply += inst.idle[[i, e]] as f64;
            demand += outbound[[i, e]];
            if demand == 0.0 {
                ratio[[i, e]] = supply;
                flag[[i, e]] = 1.0;
            } else {
                ratio[[i, e]] = supply / demand;
            }
        }
    }
    Summary { outbound, inbound, mean_lambda, gaps, ratio, flag }
}

pub fn extract_features(inst: &MpcInstance) -> FeatureVector {
    let s = summarise(inst);
    let z = inst.zones;
    let mut v = Vec::with_capacity(feature_len(z, inst.horizon, inst.multiplier_count()));
    v.extend(inst.idle.iter().map(|&x| x as f64));
    v.extend(s.outbound.iter());
    v.extend(s.inbound.iter());
    v.extend(s.mean_lambda.iter());
    v.extend(s.gaps.iter());
    v.extend(s.ratio.iter());
    v.extend(s.flag.iter());
    for i in 0..z {
        for j in 0..z {
            v.push(inst.base_demand[[i, j, 0]] as f64);
        }
    }
    FeatureVector { values: v }
}

/// One row per zone.
pub fn zone_features(inst: &MpcInstance) -> Array2<f64> {
    let s = summarise(inst);
    let (z, t, k) = (inst.zones, inst.horizon, inst.multiplier_count());
    let supply_now = inst.idle.column(0).sum() as f64 / z as f64;
    let demand_now = s.outbound.column(0).sum() / z as f64;
    let width = zone_feature_len(t, k);
    let mut out = Array2::zeros((z, width));
    for i in 0..z {
        let row: Vec<f64> = inst
            .idle
            .row(i)
            .iter()
            .map(|&x| x as f64)
            .chain(s.outbound.row(i).iter().copied())
            .chain(s.inbound.row(i).iter().copied())
            .chain([s.mean_lambda[i]])
            .chain(s.gaps.row(i).iter().copied())
            .chain(s.ratio.row(i).iter().copied())
            .chain(s.flag.row(i).iter().copied())
            .chain([supply_now, demand_now])
            .collect();
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    out
}

/// First-epoch vehicles leaving and entering each zone under the chosen multipliers.
pub fn first_epoch_demand(inst: &MpcInstance, choice: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let z = inst.zones;
    let mut outbound = vec![0.0; z];
    let mut inbound = vec![0.0; z];
    for i in 0..z {
        for j in 0..z {
            let d = inst.demand_options[[choice[i], i, j, 0]] as f64;
            outbound[i] += d;
            inbound[j] += d;
        }
    }
    (outbound, inbound)
}

/// Learner inputs in both layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerInput {
    pub flat: Vec<f64>,
    pub zone: Array2<f64>,
}

impl LearnerInput {
    pub fn zones(&self) -> usize {
        self.zone.nrows()
    }
}

pub fn pricing_input(inst: &MpcInstance) -> LearnerInput {
    LearnerInput { flat: extract_features(inst).values, zone: zone_features(inst) }
}

/// Pricing inputs followed by the first-epoch demand implied by `choice`.
pub fn relocation_input(inst: &MpcInstance, choice: &[usize]) -> LearnerInput {
    let base = pricing_input(inst);
    let (outbound, inbound) = first_epoch_demand(inst, choice);
    let mut flat = base.flat;
    for i in 0..inst.zones {
        flat.push(outbound[i]);
        flat.push(inbound[i]);
    }
    let (z, w) = base.zone.dim();
    let zone = Array2::from_shape_fn((z, w + 2), |(i, c)| match c.cmp(&w) {
        std::cmp::Ordering::Less => base.zone[[i, c]],
        std::cmp::Ordering::Equal => outbound[i],
        std::cmp::Ordering::Greater => inbound[i],
    });
    LearnerInput { flat, zone }
}

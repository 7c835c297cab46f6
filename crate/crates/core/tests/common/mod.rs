#![allow(dead_code)]

pub mod oracle;

use ndarray::{Array2, Array3};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridehail::geometry::TravelMatrix;
use ridehail::mpc::{MpcInstance, ServiceGuarantee};
use ridehail::weights::WeightParams;

pub fn reference_weights() -> WeightParams {
    WeightParams { service_base: 0.5, service_decay: 0.75, relocation_scale: 0.001 }
}

/// Random instance with at most 2 zones, 2 epochs, 2 multipliers and 3 idle
/// vehicles per cell.
pub fn micro_instance(seed: u64) -> MpcInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = rng.random_range(1..=2);
    let t = rng.random_range(1..=2);
    let s = rng.random_range(1..=t);
    let travel = TravelMatrix {
        seconds: Array2::from_shape_fn((z, z), |(i, j)| if i == j { 120.0 } else { rng.random_range(100.0..800.0) }),
        epochs: Array2::from_shape_fn((z, z), |(i, j)| if i == j { 1 } else { rng.random_range(1..=2) }),
    };
    let idle = Array2::from_shape_fn((z, t), |_| rng.random_range(0..=3));
    let demand = Array3::from_shape_fn((z, z, t), |_| rng.random_range(0..=3));
    let relocation_only = rng.random_bool(0.2);
    let multipliers = if relocation_only { vec![1.0] } else { vec![[1.0, 0.75, 0.5][rng.random_range(0..3)], 0.0] };
    let inst = MpcInstance::new(idle, demand, multipliers.clone(), &travel, s, 1.5, reference_weights(), 12).unwrap();
    if relocation_only {
        inst.with_multipliers(multipliers, ServiceGuarantee::Soft)
    } else {
        inst
    }
}

/// Random instance on 4 zones with totals at most 6.
pub fn small_transport(seed: u64) -> ridehail::transport::TransportProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4;
    let total = rng.random_range(0..=6u64);
    let mut spread = |total: u64| {
        let mut v = vec![0u64; n];
        for _ in 0..total {
            v[rng.random_range(0..n)] += 1;
        }
        v
    };
    let supply = spread(total);
    let demand = spread(total);
    let cost = Array2::from_shape_fn((n, n), |_| (rng.random_range(0..100) as f64) * 1.5);
    ridehail::transport::TransportProblem::new(supply, demand, cost).unwrap()
}

/// Minimum cost over every integral matrix with the given margins.
pub fn transport_brute_force(p: &ridehail::transport::TransportProblem) -> f64 {
    fn rows(p: &ridehail::transport::TransportProblem, i: usize, cols: &mut Vec<u64>, acc: f64, best: &mut f64) {
        if i == p.supply.len() {
            if cols.iter().all(|&c| c == 0) && acc < *best {
                *best = acc;
            }
            return;
        }
        fill(p, i, 0, p.supply[i], cols, acc, best);
    }
    fn fill(p: &ridehail::transport::TransportProblem, i: usize, j: usize, left: u64, cols: &mut Vec<u64>, acc: f64, best: &mut f64) {
        if j == cols.len() {
            if left == 0 {
                rows(p, i + 1, cols, acc, best);
            }
            return;
        }
        for x in 0..=left.min(cols[j]) {
            cols[j] -= x;
            fill(p, i, j + 1, left - x, cols, acc + x as f64 * p.cost[[i, j]], best);
            cols[j] += x;
        }
    }
    let mut best = f64::INFINITY;
    rows(p, 0, &mut p.demand.clone(), 0.0, &mut best);
    best
}

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng as _;

use super::router::ZoneTimes;
use crate::demand::Request;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleTask {
    Idle,
    Serving,
    Relocating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vehicle {
    pub id: usize,
    /// Current zone when idle, otherwise the zone it will be idle in.
    pub zone: usize,
    pub busy_until: u64,
    pub onboard: u32,
    pub task: VehicleTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenRequest {
    pub request: Request,
    pub penalty: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelocationViolation {
    Shape { rows: usize, cols: usize, zones: usize },
    SelfLoop { zone: usize, count: u32 },
    ExceedsIdle { zone: usize, requested: u64, idle: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantViolation {
    FleetSize { expected: usize, found: usize },
    OverCapacity { vehicle: usize, onboard: u32 },
    PassengersWhileRelocating { vehicle: usize },
    StaleBusy { vehicle: usize, busy_until: u64 },
    RiderAccounting { arrivals: u64, accounted: u64 },
}

/// Everything the event loop mutates.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: u64,
    pub vehicles: Vec<Vehicle>,
    pub open: BTreeMap<u64, OpenRequest>,
    /// Multiplier in force per zone.
    pub multipliers: Vec<f64>,
    pub epoch_seconds: u64,
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    pub discarded: u64,
    pub wait_total_s: u64,
    pub relocations: u64,
}

/// Same decision for the same request under the same seed, whatever the event order.
pub fn retained(seeds: &Rng, request_id: u64, multiplier: f64) -> bool {
    if multiplier >= 1.0 {
        return true;
    }
    if multiplier <= 0.0 {
        return false;
    }
    seeds.indexed(rng::PRICING_DISCARD, request_id).random_bool(multiplier)
}

impl SimState {
    /// `fleet_size` idle vehicles dealt round-robin over zones.
    pub fn new(zones: usize, fleet_size: usize, epoch_seconds: u64) -> Self {
        let vehicles = (0..fleet_size)
            .map(|id| Vehicle { id, zone: id % zones, busy_until: 0, onboard: 0, task: VehicleTask::Idle })
            .collect();
        Self {
            clock: 0,
            vehicles,
            open: BTreeMap::new(),
            multipliers: vec![1.0; zones],
            epoch_seconds,
            arrivals: 0,
            served: 0,
            dropped: 0,
            discarded: 0,
            wait_total_s: 0,
            relocations: 0,
        }
    }

    pub fn zones(&self) -> usize {
        self.multipliers.len()
    }

    pub fn idle_per_zone(&self) -> Vec<usize> {
        let mut idle = vec![0; self.zones()];
        for v in self.vehicles.iter().filter(|v| v.task == VehicleTask::Idle) {
            idle[v.zone] += 1;
        }
        idle
    }

    /// A new request either joins the open pool or is priced out.
    pub fn admit(&mut self, request: Request, penalty: i64, seeds: &Rng) {
        self.arrivals += 1;
        if retained(seeds, request.id, self.multipliers[request.origin]) {
            self.open.insert(request.id, OpenRequest { request, penalty });
        } else {
            self.discarded += 1;
        }
    }

    /// Install new multipliers and re-price open requests placed in the current epoch.
    pub fn apply_pricing(&mut self, multipliers: &[f64], seeds: &Rng) {
        self.multipliers = multipliers.to_vec();
        let epoch = self.clock / self.epoch_seconds;
        let gone: Vec<u64> = self
            .open
            .values()
            .filter(|o| o.request.time_s / self.epoch_seconds == epoch)
            .filter(|o| !retained(seeds, o.request.id, multipliers[o.request.origin]))
            .map(|o| o.request.id)
            .collect();
        for id in gone {
            self.open.remove(&id);
            self.discarded += 1;
        }
    }

    pub fn validate_relocation(&self, plan: &Array2<u32>) -> Vec<RelocationViolation> {
        let z = self.zones();
        if plan.dim() != (z, z) {
            return vec![RelocationViolation::Shape { rows: plan.nrows(), cols: plan.ncols(), zones: z }];
        }
        let idle = self.idle_per_zone();
        let mut out = Vec::new();
        for i in 0..z {
            if plan[[i, i]] > 0 {
                out.push(RelocationViolation::SelfLoop { zone: i, count: plan[[i, i]] });
            }
            let requested: u64 = plan.row(i).iter().map(|&v| v as u64).sum();
            if requested > idle[i] as u64 {
                out.push(RelocationViolation::ExceedsIdle { zone: i, requested, idle: idle[i] as u64 });
            }
        }
        out
    }

    /// Dispatch `plan[i, j]` idle vehicles from `i` to `j`, lowest ids first.
    /// Returns the dispatched vehicle ids; nothing moves if the plan is rejected.
    pub fn apply_relocation(&mut self, plan: &Array2<u32>, times: &ZoneTimes) -> Result<Vec<usize>, Vec<RelocationViolation>> {
        let problems = self.validate_relocation(plan);
        if !problems.is_empty() {
            return Err(problems);
        }
        let mut moved = Vec::new();
        for ((i, j), &count) in plan.indexed_iter() {
            for _ in 0..count {
                let v = self
                    .vehicles
                    .iter_mut()
                    .find(|v| v.task == VehicleTask::Idle && v.zone == i)
                    .expect("validated against idle counts");
                v.task = VehicleTask::Relocating;
                v.zone = j;
                v.busy_until = self.clock + times.leg(i, j);
                moved.push(v.id);
            }
        }
        self.relocations += moved.len() as u64;
        Ok(moved)
    }

    pub fn check_invariants(&self, fleet_size: usize, capacity: u32) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        if self.vehicles.len() != fleet_size {
            out.push(InvariantViolation::FleetSize { expected: fleet_size, found: self.vehicles.len() });
        }
        for v in &self.vehicles {
            if v.onboard > capacity {
                out.push(InvariantViolation::OverCapacity { vehicle: v.id, onboard: v.onboard });
            }
            if v.task != VehicleTask::Serving && v.onboard > 0 {
                out.push(InvariantViolation::PassengersWhileRelocating { vehicle: v.id });
            }
            if v.task != VehicleTask::Idle && v.busy_until < self.clock {
                out.push(InvariantViolation::StaleBusy { vehicle: v.id, busy_until: v.busy_until });
            }
        }
        let accounted = self.served + self.dropped + self.discarded + self.open.len() as u64;
        if accounted != self.arrivals {
            out.push(InvariantViolation::RiderAccounting { arrivals: self.arrivals, accounted });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn times() -> ZoneTimes {
        ZoneTimes { seconds: array![[120, 420], [420, 120]] }
    }

    fn request(id: u64, origin: usize) -> Request {
        Request { id, origin, dest: 0, time_s: 0, riders: 1 }
    }

    #[test]
    fn empty_plan_changes_nothing() {
        let mut s = SimState::new(2, 4, 300);
        let before = s.vehicles.clone();
        assert_eq!(s.apply_relocation(&Array2::zeros((2, 2)), &times()).unwrap(), Vec::<usize>::new());
        assert_eq!(s.vehicles, before);
    }

    #[test]
    fn relocation_bookkeeping() {
        let mut s = SimState::new(2, 6, 300);
        s.clock = 600;
        let moved = s.apply_relocation(&array![[0, 2], [0, 0]], &times()).unwrap();
        assert_eq!(moved, vec![0, 2]);
        assert_eq!(s.idle_per_zone(), vec![1, 3]);
        assert!(moved.iter().all(|&v| s.vehicles[v].busy_until == 1020 && s.vehicles[v].zone == 1));
        assert_eq!(s.relocations, 2);
    }

    #[test]
    fn overdrawn_plan_is_rejected() {
        let mut s = SimState::new(2, 2, 300);
        let err = s.apply_relocation(&array![[0, 2], [0, 0]], &times()).unwrap_err();
        assert_eq!(err, vec![RelocationViolation::ExceedsIdle { zone: 0, requested: 2, idle: 1 }]);
        assert_eq!(s.relocations, 0);
    }

    #[test]
    fn full_and_zero_multipliers() {
        let seeds = Rng::new(3);
        let mut s = SimState::new(2, 1, 300);
        s.multipliers = vec![1.0, 0.0];
        for id in 0..50 {
            s.admit(request(id, (id % 2) as usize), 100, &seeds);
        }
        assert_eq!(s.open.len(), 25);
        assert_eq!(s.discarded, 25);
        assert!(s.check_invariants(1, 4).is_empty());
    }

    #[test]
    fn repricing_discards_current_epoch_requests() {
        let seeds = Rng::new(3);
        let mut s = SimState::new(2, 1, 300);
        for id in 0..10 {
            s.admit(request(id, 0), 100, &seeds);
        }
        s.apply_pricing(&[0.0, 1.0], &seeds);
        assert_eq!(s.discarded, 10);
        assert!(s.open.is_empty());
    }

    #[test]
    fn half_retention_is_binomial() {
        let (n, seeds) = (1000u64, 500u64);
        let mut kept = 0u64;
        for seed in 0..seeds {
            let rng = Rng::new(seed);
            kept += (0..n).filter(|&id| retained(&rng, id, 0.5)).count() as u64;
        }
        let trials = (n * seeds) as f64;
        let sigma = (trials * 0.25).sqrt();
        assert!((kept as f64 - trials * 0.5).abs() < 3.0 * sigma, "kept {kept}");
    }
}

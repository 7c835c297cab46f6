use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use ndarray::Array2;

use super::metrics::{EpochTrace, Metrics, METRICS_SCHEMA_VERSION};
use super::policy::Policy;
use super::router::{solve_batch, BatchRequest, RouterBatch, RouterSettings, ZoneTimes};
use super::state::{InvariantViolation, SimState, VehicleTask};
use super::SimError;
use crate::config::ScenarioConfig;
use crate::demand::{disaggregate, DemandPattern, DemandTensor, DestinationDistribution, RequestStream};
use crate::geometry::{travel_for_config, TravelMatrix};
use crate::mpc::{build_instance, MpcInstance, VehicleAvailability};
use crate::numeric::round_half_up;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub record_instances: bool,
    pub trace: bool,
    pub allow_sharing: bool,
    pub router_node_budget: u64,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { record_instances: false, trace: false, allow_sharing: true, router_node_budget: 200_000 }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub metrics: Metrics,
    pub instances: Vec<MpcInstance>,
    pub trace: Vec<EpochTrace>,
    pub first_violation: Option<InvariantViolation>,
    /// Slowest single policy decision, wall clock.
    pub max_decision_s: f64,
}

/// Same-time events run in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    VehicleFree(usize),
    EpochTick(usize),
    Arrival(usize),
    RouterTick,
}

/// Expected vehicle demand for the `cfg.horizon` epochs starting at `epoch`:
/// riders per origin from the pattern, converted to vehicles, split over
/// destinations by the pattern's own shares. Epochs past the episode are empty.
pub fn forecast_demand(cfg: &ScenarioConfig, pattern: &DemandPattern, epoch: usize) -> Result<DemandTensor, SimError> {
    let z = cfg.zone_count;
    let mut out = DemandTensor::zeros(z, cfg.horizon);
    for t in 0..cfg.horizon {
        let e = epoch + t;
        if e >= cfg.episode_epochs {
            break;
        }
        let rates = pattern.rates(z, e, cfg.episode_epochs);
        let zone = Array2::from_shape_fn((z, 1), |(i, _)| round_half_up(rates.row(i).sum() / cfg.rideshare) as u32);
        let split = disaggregate(&zone, &DestinationDistribution::from_rates(&rates))?;
        out.vehicles.slice_mut(ndarray::s![.., .., t]).assign(&split.vehicles.slice(ndarray::s![.., .., 0]));
    }
    Ok(out)
}

struct Episode<'a> {
    cfg: &'a ScenarioConfig,
    stream: &'a RequestStream,
    pattern: &'a DemandPattern,
    policy: &'a Policy,
    options: EpisodeOptions,
    seeds: Rng,
    travel: TravelMatrix,
    times: ZoneTimes,
    router: RouterSettings,
    state: SimState,
    queue: BinaryHeap<Reverse<(u64, Event, u64)>>,
    seq: u64,
    outcome: EpisodeOutcome,
}

impl Episode<'_> {
    fn push(&mut self, at: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse((at, event, self.seq)));
    }

    fn base_penalty(&self) -> i64 {
        2 * self.cfg.pickup_patience_seconds() as i64
    }

    fn epoch_tick(&mut self, epoch: usize) -> Result<(), SimError> {
        let clock = self.state.clock;
        let fleet: Vec<VehicleAvailability> = self
            .state
            .vehicles
            .iter()
            .map(|v| VehicleAvailability { zone: v.zone, seconds_until_idle: v.busy_until.saturating_sub(clock) })
            .collect();
        let demand = forecast_demand(self.cfg, self.pattern, epoch)?;
        let inst = build_instance(&demand, &fleet, self.cfg, &self.travel).map_err(|e| SimError::Policy(e.to_string()))?;
        let mut rng = self.seeds.indexed(rng::RESTORATION, epoch as u64);
        let started = Instant::now();
        let actions = self.policy.decide(&inst, &mut rng)?;
        self.outcome.max_decision_s = self.outcome.max_decision_s.max(started.elapsed().as_secs_f64());
        self.outcome.metrics.decisions += 1;
        self.state.apply_pricing(&actions.multipliers, &self.seeds);
        let moved = self
            .state
            .apply_relocation(&actions.relocation, &self.times)
            .map_err(|violations| SimError::Relocation { epoch, violations })?;
        for v in moved {
            let at = self.state.vehicles[v].busy_until;
            self.push(at, Event::VehicleFree(v));
        }
        if self.options.trace {
            self.outcome.trace.push(EpochTrace {
                schema_version: METRICS_SCHEMA_VERSION,
                epoch,
                idle: inst.idle.column(0).to_vec(),
                multipliers: actions.multipliers.clone(),
                relocations: actions.relocation.iter().map(|&v| v as u64).sum(),
                open: self.state.open.len(),
                served: self.state.served,
                dropped: self.state.dropped,
            });
        }
        if self.options.record_instances {
            self.outcome.instances.push(inst);
        }
        Ok(())
    }

    fn router_tick(&mut self) {
        let clock = self.state.clock;
        let patience = self.cfg.match_patience_seconds();
        let expired: Vec<u64> =
            self.state.open.values().filter(|o| clock - o.request.time_s > patience).map(|o| o.request.id).collect();
        for id in expired {
            self.state.open.remove(&id);
            self.state.dropped += 1;
        }
        let requests: Vec<BatchRequest> = self
            .state
            .open
            .values()
            .map(|o| BatchRequest {
                id: o.request.id,
                origin: o.request.origin,
                dest: o.request.dest,
                time_s: o.request.time_s,
                riders: o.request.riders,
                penalty: o.penalty,
            })
            .collect();
        if requests.is_empty() {
            return;
        }
        let batch = RouterBatch::new(clock, requests, self.state.idle_per_zone(), &self.times, &self.router);
        let assignment = solve_batch(&batch, self.router.node_budget);
        if assignment.budget_hit {
            self.outcome.metrics.router_budget_hits += 1;
        }
        for &k in &assignment.routes {
            let route = &batch.routes[k];
            let v = self
                .state
                .vehicles
                .iter_mut()
                .find(|v| v.task == VehicleTask::Idle && v.zone == route.zone)
                .expect("router respects idle counts");
            v.task = VehicleTask::Serving;
            v.zone = route.end_zone;
            v.busy_until = route.finish_s;
            v.onboard = route.riders;
            let (id, at) = (v.id, v.busy_until);
            for (&r, &w) in route.requests.iter().zip(&route.waits) {
                self.state.open.remove(&batch.requests[r].id);
                self.state.served += 1;
                self.state.wait_total_s += w;
            }
            self.push(at, Event::VehicleFree(id));
        }
        let factor = self.cfg.penalty_escalation;
        for o in self.state.open.values_mut() {
            o.penalty = ((o.penalty as f64 * factor).round() as i64).min(1 << 40);
        }
    }

    fn run(mut self) -> Result<EpisodeOutcome, SimError> {
        let end = self.cfg.episode_seconds();
        for e in 0..self.cfg.episode_epochs {
            self.push(e as u64 * self.cfg.epoch_seconds, Event::EpochTick(e));
        }
        for (k, r) in self.stream.requests.iter().enumerate() {
            self.push(r.time_s, Event::Arrival(k));
        }
        self.push(0, Event::RouterTick);
        let (mut arrivals_left, fleet, cap) = (self.stream.len(), self.cfg.fleet_size, self.cfg.vehicle_capacity);
        while let Some(Reverse((at, event, _))) = self.queue.pop() {
            self.state.clock = at;
            match event {
                Event::VehicleFree(v) => {
                    let v = &mut self.state.vehicles[v];
                    if v.task != VehicleTask::Idle && v.busy_until == at {
                        v.task = VehicleTask::Idle;
                        v.onboard = 0;
                    }
                }
                Event::EpochTick(e) => self.epoch_tick(e)?,
                Event::Arrival(k) => {
                    arrivals_left -= 1;
                    let penalty = self.base_penalty();
                    self.state.admit(self.stream.requests[k], penalty, &self.seeds);
                }
                Event::RouterTick => {
                    self.router_tick();
                    let next = at + self.cfg.router_batch_seconds;
                    if next < end || arrivals_left > 0 || !self.state.open.is_empty() {
                        self.push(next, Event::RouterTick);
                    }
                }
            }
            let problems = self.state.check_invariants(fleet, cap);
            self.outcome.metrics.invariant_violations += problems.len() as u64;
            if self.outcome.first_violation.is_none() {
                self.outcome.first_violation = problems.into_iter().next();
            }
        }
        let s = &self.state;
        let m = &mut self.outcome.metrics;
        m.arrivals = s.arrivals;
        m.served = s.served;
        m.dropped = s.dropped;
        m.discarded = s.discarded;
        m.open = s.open.len() as u64;
        m.dropout_pct = if s.arrivals == 0 { 0.0 } else { 100.0 * s.dropped as f64 / s.arrivals as f64 };
        m.mean_wait_s = if s.served == 0 { 0.0 } else { s.wait_total_s as f64 / s.served as f64 };
        m.relocations = s.relocations;
        Ok(self.outcome)
    }
}

/// Simulate one episode of `stream` under `policy`. The policy sees demand
/// forecasts built from `pattern`; pricing draws and restoration use `seed`.
pub fn run_episode(
    cfg: &ScenarioConfig,
    stream: &RequestStream,
    pattern: &DemandPattern,
    policy: &Policy,
    seed: u64,
    options: EpisodeOptions,
) -> Result<EpisodeOutcome, SimError> {
    cfg.validate().map_err(|e| SimError::Config(e.to_string()))?;
    stream.validate(cfg.zone_count)?;
    let mut ids: Vec<u64> = stream.requests.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(SimError::Config("request ids must be unique".into()));
    }
    let travel = travel_for_config(cfg).map_err(|e| SimError::Config(e.to_string()))?;
    let times = ZoneTimes::new(&travel, cfg.intra_zone_seconds);
    let metrics = Metrics {
        schema_version: METRICS_SCHEMA_VERSION,
        policy: policy.kind().name().to_string(),
        seed,
        arrivals: 0,
        served: 0,
        dropped: 0,
        discarded: 0,
        open: 0,
        dropout_pct: 0.0,
        mean_wait_s: 0.0,
        relocations: 0,
        decisions: 0,
        invariant_violations: 0,
        router_budget_hits: 0,
    };
    let episode = Episode {
        cfg,
        stream,
        pattern,
        policy,
        options,
        seeds: Rng::new(seed),
        router: RouterSettings {
            capacity: cfg.vehicle_capacity,
            pickup_patience_s: cfg.pickup_patience_seconds(),
            detour_factor: cfg.detour_factor,
            allow_sharing: options.allow_sharing,
            node_budget: options.router_node_budget,
        },
        travel,
        times,
        state: SimState::new(cfg.zone_count, cfg.fleet_size, cfg.epoch_seconds),
        queue: BinaryHeap::new(),
        seq: 0,
        outcome: EpisodeOutcome { metrics, instances: Vec::new(), trace: Vec::new(), first_violation: None, max_decision_s: 0.0 },
    };
    episode.run()
}

//! Batched matching of open requests to idle vehicles.
//!
//! Each batch enumerates single-pickup and, when sharing is on, two-pickup
//! routes for every zone that has idle vehicles, then picks at most one route
//! per vehicle and at most one route per request so that summed waiting time
//! plus penalties for unserved requests is minimal.

use ndarray::Array2;
use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::geometry::TravelMatrix;

/// Whole-second travel times with the intra-zone time on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTimes {
    pub seconds: Array2<u64>,
}

impl ZoneTimes {
    pub fn new(travel: &TravelMatrix, intra_zone_seconds: u64) -> Self {
        let seconds = Array2::from_shape_fn(travel.seconds.dim(), |(i, j)| {
            if i == j {
                intra_zone_seconds
            } else {
                travel.seconds[[i, j]].round().max(1.0) as u64
            }
        });
        Self { seconds }
    }

    pub fn leg(&self, from: usize, to: usize) -> u64 {
        self.seconds[[from, to]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouterSettings {
    pub capacity: u32,
    pub pickup_patience_s: u64,
    pub detour_factor: f64,
    pub allow_sharing: bool,
    pub node_budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchRequest {
    pub id: u64,
    pub origin: usize,
    pub dest: usize,
    pub time_s: u64,
    pub riders: u32,
    pub penalty: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    /// Zone of the vehicle that drives it.
    pub zone: usize,
    /// Batch indices in pickup order.
    pub requests: Vec<usize>,
    pub waits: Vec<u64>,
    pub cost: i64,
    pub finish_s: u64,
    pub end_zone: usize,
    pub riders: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouterBatch {
    pub clock: u64,
    pub requests: Vec<BatchRequest>,
    pub idle: Vec<usize>,
    pub routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Indices into `RouterBatch::routes`.
    pub routes: Vec<usize>,
    /// Summed waits of chosen routes plus penalties of unserved requests.
    pub objective: i64,
    pub budget_hit: bool,
}

impl RouterBatch {
    pub fn new(clock: u64, requests: Vec<BatchRequest>, idle: Vec<usize>, times: &ZoneTimes, s: &RouterSettings) -> Self {
        let mut routes = Vec::new();
        for (a, _) in idle.iter().enumerate().filter(|(_, &n)| n > 0) {
            for (r, q) in requests.iter().enumerate() {
                let pickup = clock + times.leg(a, q.origin);
                let wait = pickup.saturating_sub(q.time_s);
                if wait <= s.pickup_patience_s && q.riders <= s.capacity {
                    routes.push(Route {
                        zone: a,
                        requests: vec![r],
                        waits: vec![wait],
                        cost: wait as i64,
                        finish_s: pickup + times.leg(q.origin, q.dest),
                        end_zone: q.dest,
                        riders: q.riders,
                    });
                }
            }
            if !s.allow_sharing {
                continue;
            }
            for (r1, q1) in requests.iter().enumerate() {
                for (r2, q2) in requests.iter().enumerate() {
                    if r1 != r2 {
                        if let Some(route) = shared_route(clock, a, (r1, q1), (r2, q2), times, s) {
                            routes.push(route);
                        }
                    }
                }
            }
        }
        Self { clock, requests, idle, routes }
    }

    pub fn penalty_total(&self) -> i64 {
        self.requests.iter().map(|q| q.penalty).sum()
    }

    fn value(&self, route: &Route) -> i64 {
        route.requests.iter().map(|&r| self.requests[r].penalty).sum::<i64>() - route.cost
    }

    /// Objective of a set of routes; `None` if it reuses a request or overdraws a zone.
    pub fn objective_of(&self, chosen: &[usize]) -> Option<i64> {
        let mut used = vec![false; self.requests.len()];
        let mut left = self.idle.clone();
        let mut value = 0;
        for &k in chosen {
            let route = &self.routes[k];
            if left[route.zone] == 0 {
                return None;
            }
            left[route.zone] -= 1;
            for &r in &route.requests {
                if std::mem::replace(&mut used[r], true) {
                    return None;
                }
            }
            value += self.value(route);
        }
        Some(self.penalty_total() - value)
    }
}

/// Pick up `first` then `second`, drop in whichever order finishes sooner
/// while keeping both riders within the detour bound.
fn shared_route(
    clock: u64,
    zone: usize,
    (r1, q1): (usize, &BatchRequest),
    (r2, q2): (usize, &BatchRequest),
    times: &ZoneTimes,
    s: &RouterSettings,
) -> Option<Route> {
    if q1.riders + q2.riders > s.capacity {
        return None;
    }
    let p1 = clock + times.leg(zone, q1.origin);
    let p2 = p1 + times.leg(q1.origin, q2.origin);
    let (w1, w2) = (p1.saturating_sub(q1.time_s), p2.saturating_sub(q2.time_s));
    if w1 > s.pickup_patience_s || w2 > s.pickup_patience_s {
        return None;
    }
    let within = |ride: u64, from: usize, to: usize| ride as f64 <= s.detour_factor * times.leg(from, to) as f64 + 1e-9;
    let mut best: Option<(u64, usize)> = None;
    // First rider off first.
    let d1 = p2 + times.leg(q2.origin, q1.dest);
    let d2 = d1 + times.leg(q1.dest, q2.dest);
    if within(d1 - p1, q1.origin, q1.dest) && within(d2 - p2, q2.origin, q2.dest) {
        best = Some((d2, q2.dest));
    }
    // Second rider off first.
    let d2 = p2 + times.leg(q2.origin, q2.dest);
    let d1 = d2 + times.leg(q2.dest, q1.dest);
    if within(d1 - p1, q1.origin, q1.dest) && within(d2 - p2, q2.origin, q2.dest) && best.is_none_or(|(f, _)| d1 < f) {
        best = Some((d1, q1.dest));
    }
    let (finish_s, end_zone) = best?;
    Some(Route {
        zone,
        requests: vec![r1, r2],
        waits: vec![w1, w2],
        cost: (w1 + w2) as i64,
        finish_s,
        end_zone,
        riders: q1.riders + q2.riders,
    })
}

struct Search<'a> {
    batch: &'a RouterBatch,
    value: Vec<i64>,
    by_first: Vec<Vec<usize>>,
    bound: Vec<i64>,
    covered: Vec<bool>,
    left: Vec<usize>,
    chosen: Vec<usize>,
    best_value: i64,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn dfs(&mut self, from: usize, value: i64, rest: i64) {
        self.nodes += 1;
        if self.nodes > self.budget || value + rest <= self.best_value {
            return;
        }
        let Some(i) = (from..self.covered.len()).find(|&i| !self.covered[i]) else {
            if value > self.best_value {
                self.best_value = value;
                self.best = self.chosen.clone();
            }
            return;
        };
        let rest = rest - self.bound[i];
        self.covered[i] = true;
        for n in 0..self.by_first[i].len() {
            let k = self.by_first[i][n];
            let route = &self.batch.routes[k];
            let zone = route.zone;
            if self.left[zone] == 0 || route.requests.iter().any(|&r| r != i && self.covered[r]) {
                continue;
            }
            let others: Vec<usize> = route.requests.iter().copied().filter(|&r| r != i).collect();
            let freed: i64 = others.iter().map(|&r| self.bound[r]).sum();
            others.iter().for_each(|&r| self.covered[r] = true);
            self.left[zone] -= 1;
            self.chosen.push(k);
            self.dfs(i + 1, value + self.value[k], rest - freed);
            self.chosen.pop();
            self.left[zone] += 1;
            others.iter().for_each(|&r| self.covered[r] = false);
        }
        self.dfs(i + 1, value, rest);
        self.covered[i] = false;
    }
}

/// Branch and bound over requests in batch order. Each request is either left
/// unserved or opens a route whose other members come later. The bound gives
/// every open request its best penalty-minus-own-wait over all routes.
pub fn solve_batch(batch: &RouterBatch, node_budget: u64) -> Assignment {
    let n = batch.requests.len();
    let value: Vec<i64> = batch.routes.iter().map(|r| batch.value(r)).collect();
    let mut by_first = vec![Vec::new(); n];
    let mut bound = vec![0i64; n];
    for (k, route) in batch.routes.iter().enumerate() {
        if value[k] <= 0 {
            continue;
        }
        let first = *route.requests.iter().min().expect("routes are non-empty");
        by_first[first].push(k);
        for (&r, &w) in route.requests.iter().zip(&route.waits) {
            bound[r] = bound[r].max(batch.requests[r].penalty - w as i64);
        }
    }
    for list in &mut by_first {
        list.sort_by_key(|&k| (std::cmp::Reverse(value[k]), k));
    }
    let greedy = greedy(batch, &value);
    let greedy_value = value_of(&greedy, &value);
    let mut search = Search {
        batch,
        value,
        by_first,
        covered: vec![false; n],
        left: batch.idle.clone(),
        chosen: Vec::new(),
        best_value: greedy_value,
        best: greedy,
        nodes: 0,
        budget: node_budget,
        bound,
    };
    let rest = search.bound.iter().sum();
    search.dfs(0, 0, rest);
    let mut routes = search.best;
    routes.sort_unstable();
    Assignment { objective: batch.penalty_total() - search.best_value, routes, budget_hit: search.nodes > node_budget }
}

fn value_of(routes: &[usize], value: &[i64]) -> i64 {
    routes.iter().map(|&k| value[k]).sum()
}

fn greedy(batch: &RouterBatch, value: &[i64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..batch.routes.len()).filter(|&k| value[k] > 0).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(value[k]), k));
    let mut used = vec![false; batch.requests.len()];
    let mut left = batch.idle.clone();
    let mut out = Vec::new();
    for k in order {
        let route = &batch.routes[k];
        if left[route.zone] > 0 && route.requests.iter().all(|&r| !used[r]) {
            left[route.zone] -= 1;
            route.requests.iter().for_each(|&r| used[r] = true);
            out.push(k);
        }
    }
    out
}

/// Single-pickup routes only, solved as a rectangular assignment between
/// requests and (vehicles plus one "unserved" slot per request).
pub fn solve_single_assignment(batch: &RouterBatch) -> Assignment {
    let n = batch.requests.len();
    if n == 0 {
        return Assignment { routes: Vec::new(), objective: 0, budget_hit: false };
    }
    let slots: Vec<usize> = batch.idle.iter().enumerate().flat_map(|(z, &c)| std::iter::repeat_n(z, c)).collect();
    let mut single = vec![vec![None; batch.idle.len()]; n];
    for (k, route) in batch.routes.iter().enumerate() {
        if let [r] = route.requests[..] {
            single[r][route.zone] = Some(k);
        }
    }
    let forbidden = -(batch.penalty_total() + 1) * 2 - batch.routes.iter().map(|r| r.cost).sum::<i64>();
    let cols = slots.len() + n;
    let weights = Matrix::from_fn(n, cols, |(r, c)| {
        if c < slots.len() {
            single[r][slots[c]].map_or(forbidden, |k| -batch.routes[k].cost)
        } else if c - slots.len() == r {
            -batch.requests[r].penalty
        } else {
            forbidden
        }
    });
    let (total, cols_of) = kuhn_munkres(&weights);
    let mut routes: Vec<usize> =
        cols_of.iter().enumerate().filter(|(_, &c)| c < slots.len()).map(|(r, &c)| single[r][slots[c]].unwrap()).collect();
    routes.sort_unstable();
    Assignment { routes, objective: -total, budget_hit: false }
}

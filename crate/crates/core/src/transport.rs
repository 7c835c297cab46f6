//! Balanced transportation problem: spread zone outflows over zone inflows at
//! minimum cost. Self-loops carry a large cost and act as slack.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TransportError {
    #[error("supply total {supply} differs from demand total {demand}")]
    Unbalanced { supply: u64, demand: u64 },
    #[error("cost matrix is {rows}x{cols}, expected {supplies}x{demands}")]
    Shape { rows: usize, cols: usize, supplies: usize, demands: usize },
    #[error("cost ({0}, {1}) is negative or not finite")]
    BadCost(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportProblem {
    pub supply: Vec<u64>,
    pub demand: Vec<u64>,
    pub cost: Array2<f64>,
}

/// Integral plan `flow[i, j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelocationMatrix {
    pub flow: Array2<u64>,
}

impl RelocationMatrix {
    pub fn cost(&self, problem: &TransportProblem) -> f64 {
        self.flow.indexed_iter().map(|((i, j), &f)| f as f64 * problem.cost[[i, j]]).sum()
    }

    /// The plan with self-loops removed; those units simply stay put.
    pub fn without_diagonal(&self) -> Array2<u64> {
        let mut m = self.flow.clone();
        for i in 0..m.nrows().min(m.ncols()) {
            m[[i, i]] = 0;
        }
        m
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.flow.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        self.flow.columns().into_iter().map(|c| c.sum()).collect()
    }
}

/// Cost of keeping a unit in place: more than any off-diagonal route.
pub fn self_loop_cost(travel_seconds: &Array2<f64>) -> f64 {
    let n = travel_seconds.nrows();
    let max = travel_seconds
        .indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, &c)| c)
        .fold(0.0, f64::max);
    1.0 + n as f64 * max
}

impl TransportProblem {
    pub fn new(supply: Vec<u64>, demand: Vec<u64>, cost: Array2<f64>) -> Result<Self, TransportError> {
        let p = Self { supply, demand, cost };
        p.check()?;
        Ok(p)
    }

    /// Zone-to-zone relocation with travel seconds as cost and a penalised diagonal.
    pub fn for_relocation(outbound: &[u64], inbound: &[u64], travel_seconds: &Array2<f64>) -> Result<Self, TransportError> {
        let big = self_loop_cost(travel_seconds);
        let mut cost = travel_seconds.clone();
        for i in 0..cost.nrows().min(cost.ncols()) {
            cost[[i, i]] = big;
        }
        Self::new(outbound.to_vec(), inbound.to_vec(), cost)
    }

    pub fn check(&self) -> Result<(), TransportError> {
        let (rows, cols) = self.cost.dim();
        if rows != self.supply.len() || cols != self.demand.len() {
            return Err(TransportError::Shape { rows, cols, supplies: self.supply.len(), demands: self.demand.len() });
        }
        if let Some(((i, j), _)) = self.cost.indexed_iter().find(|(_, c)| !c.is_finite() || **c < 0.0) {
            return Err(TransportError::BadCost(i, j));
        }
        let (supply, demand) = (self.supply.iter().sum::<u64>(), self.demand.iter().sum::<u64>());
        if supply != demand {
            return Err(TransportError::Unbalanced { supply, demand });
        }
        Ok(())
    }

    pub fn is_feasible(&self, plan: &RelocationMatrix) -> bool {
        plan.flow.dim() == self.cost.dim() && plan.row_sums() == self.supply && plan.column_sums() == self.demand
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

struct Network {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: u64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }
}

/// Minimum-cost integral plan by successive shortest paths with potentials.
pub fn solve_transport(problem: &TransportProblem) -> Result<RelocationMatrix, TransportError> {
    problem.check()?;
    let (m, n) = problem.cost.dim();
    let total: u64 = problem.supply.iter().sum();
    let (source, sink) = (m + n, m + n + 1);
    let mut net = Network::new(m + n + 2);
    for (i, &s) in problem.supply.iter().enumerate() {
        if s > 0 {
            net.add(source, i, s, 0.0);
        }
    }
    for (j, &d) in problem.demand.iter().enumerate() {
        if d > 0 {
            net.add(m + j, sink, d, 0.0);
        }
    }
    let mut arcs = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if problem.supply[i] > 0 && problem.demand[j] > 0 {
                arcs.push((i, j, net.add(i, m + j, total, problem.cost[[i, j]])));
            }
        }
    }

    let nodes = m + n + 2;
    let mut potential = vec![0.0; nodes];
    let mut sent = 0u64;
    while sent < total {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::from([Entry(0.0, source)]);
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &net.adj[u] {
                let edge = &net.edges[e];
                if edge.cap == 0 {
                    continue;
                }
                // Reduced costs are nonnegative up to rounding.
                let reduced = (edge.cost + potential[u] - potential[edge.to]).max(0.0);
                let nd = d + reduced;
                if nd < dist[edge.to] {
                    dist[edge.to] = nd;
                    via[edge.to] = e;
                    heap.push(Entry(nd, edge.to));
                }
            }
        }
        if !dist[sink].is_finite() {
            unreachable!("balanced bipartite network always has an augmenting path");
        }
        for v in 0..nodes {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        let mut push = total - sent;
        let mut v = sink;
        while v != source {
            let e = via[v];
            push = push.min(net.edges[e].cap);
            v = net.edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let e = via[v];
            net.edges[e].cap -= push;
            net.edges[e ^ 1].cap += push;
            v = net.edges[e ^ 1].to;
        }
        sent += push;
    }

    let mut flow = Array2::zeros((m, n));
    for (i, j, e) in arcs {
        flow[[i, j]] = net.edges[e ^ 1].cap;
    }
    Ok(RelocationMatrix { flow })
}

/// Dual prices proving `plan` optimal: `u[i] + v[j] <= cost[i, j]` everywhere,
/// with equality on arcs carrying flow. `None` if no such prices exist (the
/// residual network has a negative cycle) or the plan is infeasible.
pub fn dual_prices(problem: &TransportProblem, plan: &RelocationMatrix) -> Option<(Vec<f64>, Vec<f64>)> {
    if problem.check().is_err() || !problem.is_feasible(plan) {
        return None;
    }
    let (m, n) = problem.cost.dim();
    // Residual arcs: supply i -> demand j always, demand j -> supply i where flow is positive.
    let mut arcs = Vec::new();
    for i in 0..m {
        for j in 0..n {
            arcs.push((i, m + j, problem.cost[[i, j]]));
            if plan.flow[[i, j]] > 0 {
                arcs.push((m + j, i, -problem.cost[[i, j]]));
            }
        }
    }
    let mut dist = vec![0.0f64; m + n];
    for round in 0..=m + n {
        let mut changed = false;
        for &(a, b, w) in &arcs {
            if dist[a] + w < dist[b] - 1e-12 {
                dist[b] = dist[a] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if round == m + n {
            return None;
        }
    }
    Some(((0..m).map(|i| -dist[i]).collect(), (0..n).map(|j| dist[m + j]).collect()))
}

/// Dual feasibility and complementary slackness within 1e-9.
pub fn certify_optimality(problem: &TransportProblem, plan: &RelocationMatrix) -> bool {
    let Some((u, v)) = dual_prices(problem, plan) else { return false };
    problem.cost.indexed_iter().all(|((i, j), &c)| {
        let slack = c - u[i] - v[j];
        slack >= -1e-9 && (plan.flow[[i, j]] == 0 || slack.abs() <= 1e-9)
    })
}

/// Margins, plan and cost as plain text.
pub struct TransportDump<'a>(pub &'a TransportProblem, pub &'a RelocationMatrix);

impl fmt::Display for TransportDump<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, plan) = (self.0, self.1);
        writeln!(f, "supply {:?}", p.supply)?;
        writeln!(f, "demand {:?}", p.demand)?;
        for row in plan.flow.rows() {
            writeln!(f, "{}", row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))?;
        }
        writeln!(f, "cost {}", plan.cost(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_margins() {
        let p = TransportProblem::new(vec![0, 0], vec![0, 0], Array2::ones((2, 2))).unwrap();
        let plan = solve_transport(&p).unwrap();
        assert_eq!(plan.flow.sum(), 0);
        assert!(certify_optimality(&p, &plan));
    }

    #[test]
    fn forced_off_diagonal() {
        let p = TransportProblem::new(vec![2, 0], vec![0, 2], array![[1000.0, 5.0], [5.0, 1000.0]]).unwrap();
        let plan = solve_transport(&p).unwrap();
        assert_eq!(plan.flow, array![[0, 2], [0, 0]]);
        assert_eq!(plan.cost(&p), 10.0);
    }

    #[test]
    fn unbalanced_is_rejected() {
        let p = TransportProblem { supply: vec![1], demand: vec![2], cost: Array2::zeros((1, 1)) };
        assert_eq!(solve_transport(&p), Err(TransportError::Unbalanced { supply: 1, demand: 2 }));
    }

    #[test]
    fn one_zone_keeps_everything() {
        let p = TransportProblem::for_relocation(&[3], &[3], &Array2::zeros((1, 1))).unwrap();
        let plan = solve_transport(&p).unwrap();
        assert_eq!(plan.flow[[0, 0]], 3);
        assert!(certify_optimality(&p, &plan));
        assert_eq!(plan.without_diagonal().sum(), 0);
    }

    #[test]
    fn rerouting_to_a_dearer_arc_fails_certification() {
        let p = TransportProblem::new(vec![1, 1], vec![1, 1], array![[1.0, 4.0], [4.0, 1.0]]).unwrap();
        let plan = solve_transport(&p).unwrap();
        assert_eq!(plan.flow, array![[1, 0], [0, 1]]);
        assert!(certify_optimality(&p, &plan));
        let worse = RelocationMatrix { flow: array![[0, 1], [1, 0]] };
        assert!(!certify_optimality(&p, &worse));
    }

    #[test]
    fn diagonal_cost_dominates() {
        let secs = array![[0.0, 300.0, 600.0], [300.0, 0.0, 300.0], [600.0, 300.0, 0.0]];
        assert_eq!(self_loop_cost(&secs), 1801.0);
        let p = TransportProblem::for_relocation(&[2, 1, 0], &[0, 1, 2], &secs).unwrap();
        let plan = solve_transport(&p).unwrap();
        assert!(certify_optimality(&p, &plan));
        // One unit must stay in zone 1 only if unavoidable; here it is not.
        assert_eq!(plan.flow[[1, 1]], 0);
    }

    proptest! {
        #[test]
        fn margins_and_certificate_hold(
            supply in prop::collection::vec(0u64..30, 5),
            raw in prop::collection::vec(0.0f64..1000.0, 25),
            perm_seed in 0u64..1000,
        ) {
            // Demand is a shuffled copy of supply so totals match.
            let mut demand = supply.clone();
            let n = demand.len();
            for k in (1..n).rev() {
                demand.swap(k, (perm_seed as usize * 31 + k * 7) % (k + 1));
            }
            let p = TransportProblem::new(supply.clone(), demand.clone(), Array2::from_shape_vec((5, 5), raw).unwrap()).unwrap();
            let plan = solve_transport(&p).unwrap();
            prop_assert_eq!(plan.row_sums(), supply);
            prop_assert_eq!(plan.column_sums(), demand);
            prop_assert!(certify_optimality(&p, &plan));
        }
    }
}

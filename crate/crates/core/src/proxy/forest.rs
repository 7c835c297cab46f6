//! Random forest of multi-output regression trees (CART, squared error).

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSettings {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Share of features tried at each split.
    pub feature_fraction: f64,
    /// Bootstrap sample size relative to the data.
    pub sample_fraction: f64,
}

impl Default for ForestSettings {
    fn default() -> Self {
        Self { trees: 30, max_depth: 8, min_leaf: 5, feature_fraction: 0.5, sample_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(Vec<f64>),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub inputs: usize,
    pub outputs: usize,
    trees: Vec<Tree>,
}

fn mean(ys: &[Vec<f64>], idx: &[usize], outputs: usize) -> Vec<f64> {
    let mut m = vec![0.0; outputs];
    for &i in idx {
        for (a, b) in m.iter_mut().zip(&ys[i]) {
            *a += b;
        }
    }
    let n = idx.len().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

struct Builder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [Vec<f64>],
    settings: ForestSettings,
    outputs: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Stream) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean(self.ys, &idx, self.outputs)));
        if depth >= self.settings.max_depth || idx.len() < 2 * self.settings.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx, rng) else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    fn best_split(&self, idx: &[usize], rng: &mut Stream) -> Option<(usize, f64)> {
        let dim = self.xs[0].len();
        let tried = ((dim as f64 * self.settings.feature_fraction).ceil() as usize).clamp(1, dim);
        let n = idx.len();
        let total: Vec<f64> = mean(self.ys, idx, self.outputs).iter().map(|m| m * n as f64).collect();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for feature in sample(rng, dim, tried) {
            order.sort_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
            let mut left = vec![0.0; self.outputs];
            for (pos, &i) in order.iter().enumerate().take(n - 1) {
                for (a, b) in left.iter_mut().zip(&self.ys[i]) {
                    *a += b;
                }
                let nl = pos + 1;
                let nr = n - nl;
                let (here, next) = (self.xs[i][feature], self.xs[order[pos + 1]][feature]);
                if nl < self.settings.min_leaf || nr < self.settings.min_leaf || here == next {
                    continue;
                }
                // Maximising this is the same as minimising the children's squared error.
                let score: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(l, t)| l * l / nl as f64 + (t - l) * (t - l) / nr as f64)
                    .sum();
                if best.is_none_or(|(s, _, _)| score > s + 1e-12) {
                    best = Some((score, feature, 0.5 * (here + next)));
                }
            }
        }
        let parent: f64 = total.iter().map(|t| t * t / n as f64).sum();
        best.filter(|(s, _, _)| *s > parent + 1e-12).map(|(_, f, t)| (f, t))
    }
}

impl Forest {
    pub fn fit(xs: &[Vec<f64>], ys: &[Vec<f64>], settings: ForestSettings, rng: &mut Stream) -> Self {
        let inputs = xs.first().map_or(0, Vec::len);
        let outputs = ys.first().map_or(0, Vec::len);
        let n = xs.len();
        let draws = ((n as f64 * settings.sample_fraction).round() as usize).max(1);
        let mut trees = Vec::with_capacity(settings.trees);
        for _ in 0..settings.trees {
            if n == 0 {
                break;
            }
            let idx: Vec<usize> = (0..draws).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder { xs, ys, settings, outputs, nodes: Vec::new() };
            b.grow(idx, 0, rng);
            trees.push(Tree { nodes: b.nodes });
        }
        Self { inputs, outputs, trees }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        for t in &self.trees {
            for (a, b) in out.iter_mut().zip(t.predict(x)) {
                *a += b;
            }
        }
        let n = self.trees.len().max(1) as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}

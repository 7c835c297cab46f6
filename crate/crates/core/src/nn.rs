//! Small dense feedforward networks trained with Adam on squared error.
//!
//! Sizes in this crate are desk-scale (tens of inputs, ~100 hidden units), so
//! everything is plain `Vec<f64>` loops; no BLAS.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn new(inputs: usize, outputs: usize, rng: &mut Stream) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(s + self.bias[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden_activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L1 penalty on weights (not biases).
    pub l1: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { epochs: 40, batch_size: 32, learning_rate: 1e-3, l1: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: &[usize], outputs: usize, activation: Activation, rng: &mut Stream) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        let layers = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Self { layers, hidden_activation: activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = self.hidden_activation.apply(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().unwrap(), &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = self.hidden_activation.apply(*v));
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over all samples and outputs.
    pub fn mse(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (x, y) in xs.iter().zip(ys) {
            for (p, t) in self.forward(x).iter().zip(y) {
                total += (p - t).powi(2);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    pub fn fit(&mut self, xs: &[Vec<f64>], ys: &[Vec<f64>], opts: &TrainOptions, rng: &mut Stream) -> Vec<EpochLog> {
        assert_eq!(xs.len(), ys.len());
        let mut log = Vec::with_capacity(opts.epochs);
        if xs.is_empty() {
            return log;
        }
        let mut adam = Adam {
            m: self.layers.iter().map(|l| vec![0.0; l.weights.len() + l.bias.len()]).collect(),
            v: self.layers.iter().map(|l| vec![0.0; l.weights.len() + l.bias.len()]).collect(),
            step: 0,
        };
        let mut grads: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.weights.len() + l.bias.len()]).collect();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let batch = opts.batch_size.max(1);
        for epoch in 0..opts.epochs {
            order.shuffle(rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
                for &idx in chunk {
                    epoch_loss += self.accumulate(&xs[idx], &ys[idx], &mut grads);
                }
                let scale = 1.0 / chunk.len() as f64;
                self.adam_step(&mut adam, &grads, scale, opts);
            }
            let outputs = self.output_dim().max(1);
            log.push(EpochLog { epoch, train_loss: epoch_loss / (xs.len() * outputs) as f64 });
        }
        log
    }

    /// Backprop one sample; returns its summed squared error.
    fn accumulate(&self, x: &[f64], y: &[f64], grads: &mut [Vec<f64>]) -> f64 {
        let acts = self.trace(x);
        let out = acts.last().unwrap();
        let n_out = out.len() as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(y)
            .map(|(p, t)| {
                loss += (p - t).powi(2);
                2.0 * (p - t) / n_out
            })
            .collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let g = &mut grads[l];
            let (gw, gb) = g.split_at_mut(layer.weights.len());
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, v) in row.iter_mut().zip(input) {
                    *w += d * v;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= self.hidden_activation.grad_from_output(*a);
            }
            delta = prev;
        }
        loss / n_out
    }

    fn adam_step(&mut self, adam: &mut Adam, grads: &[Vec<f64>], scale: f64, opts: &TrainOptions) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        adam.step += 1;
        let c1 = 1.0 - B1.powi(adam.step);
        let c2 = 1.0 - B2.powi(adam.step);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let n_w = layer.weights.len();
            let (m, v) = (&mut adam.m[l], &mut adam.v[l]);
            for k in 0..n_w + layer.bias.len() {
                let param = if k < n_w { &mut layer.weights[k] } else { &mut layer.bias[k - n_w] };
                let mut g = grads[l][k] * scale;
                if k < n_w && opts.l1 > 0.0 {
                    g += opts.l1 * param.signum();
                }
                m[k] = B1 * m[k] + (1.0 - B1) * g;
                v[k] = B2 * v[k] + (1.0 - B2) * g * g;
                *param -= opts.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + EPS);
            }
        }
    }
}

/// Per-column affine normalisation fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = var.into_iter().map(|v| if v.sqrt() < 1e-8 { 1.0 } else { v.sqrt() }).collect();
        Self { mean, std }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

/// An [`Mlp`] with input and target standardisation baked in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledMlp {
    pub inputs: Standardizer,
    pub targets: Standardizer,
    pub net: Mlp,
}

impl ScaledMlp {
    pub fn fit(
        xs: &[Vec<f64>],
        ys: &[Vec<f64>],
        hidden: &[usize],
        activation: Activation,
        opts: &TrainOptions,
        rng: &mut Stream,
    ) -> (Self, Vec<EpochLog>) {
        let inputs = Standardizer::fit(xs);
        let targets = Standardizer::fit(ys);
        let sx: Vec<Vec<f64>> = xs.iter().map(|x| inputs.transform(x)).collect();
        let sy: Vec<Vec<f64>> = ys.iter().map(|y| targets.transform(y)).collect();
        let in_dim = xs.first().map_or(0, Vec::len);
        let out_dim = ys.first().map_or(0, Vec::len);
        let mut net = Mlp::new(in_dim, hidden, out_dim, activation, rng);
        let log = net.fit(&sx, &sy, opts, rng);
        (Self { inputs, targets, net }, log)
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.targets.inverse(&self.net.forward(&self.inputs.transform(x)))
    }
}

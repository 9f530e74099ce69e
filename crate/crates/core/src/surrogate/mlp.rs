//! Shared multilayer-perceptron machinery: tanh hidden layers, linear output,
//! manual backprop, and an Adam optimizer. Both the deterministic network and
//! the Bayesian network forward through this code path, so a Bayesian model
//! with zero weight spread reproduces the deterministic model exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension affine normalization (z-score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Fits per-dimension mean and std over rows; zero stds become 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for (s, (x, m)) in std.iter_mut().zip(r.iter().zip(&mean)) {
                *s += (x - m).powi(2);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / (n - 1.0).max(1.0)).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Normalization { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_scalar(&self, y: f64) -> f64 {
        (y - self.mean[0]) / self.std[0]
    }

    pub fn invert_scalar(&self, y: f64) -> f64 {
        y * self.std[0] + self.mean[0]
    }
}

/// Dense feedforward parameters: weights\[l\] is (out x in) row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Validates that an architecture is usable for scalar regression.
    pub fn check_arch(arch: &[usize]) -> Result<()> {
        if arch.len() < 2 || arch.iter().any(|w| *w == 0) {
            return Err(Error::argument("architecture needs >= 2 nonzero layer widths"));
        }
        if *arch.last().unwrap() != 1 {
            return Err(Error::argument("output layer must have exactly one neuron"));
        }
        Ok(())
    }

    pub fn zeros(arch: &[usize]) -> Result<Self> {
        Self::check_arch(arch)?;
        let weights = (1..arch.len())
            .map(|l| vec![0.0; arch[l] * arch[l - 1]])
            .collect();
        let biases = (1..arch.len()).map(|l| vec![0.0; arch[l]]).collect();
        Ok(Mlp { arch: arch.to_vec(), weights, biases })
    }

    /// Xavier-uniform initialization with the given RNG.
    pub fn init_xavier(arch: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        for l in 0..net.weights.len() {
            let fan_in = arch[l] as f64;
            let fan_out = arch[l + 1] as f64;
            let bound = (6.0 / (fan_in + fan_out)).sqrt();
            for w in net.weights[l].iter_mut() {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_weights(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    /// Forward pass on a normalized input; returns activations per layer
    /// (index 0 is the input itself). Hidden layers tanh, output linear.
    pub fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.arch.len());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let n_in = self.arch[l];
            let prev = &acts[l];
            let mut z = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                *zo += row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>();
            }
            if l != self.n_layers() - 1 {
                for zo in z.iter_mut() {
                    *zo = zo.tanh();
                }
            }
            acts.push(z);
        }
        acts
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        let acts = self.forward(x);
        acts.last().unwrap()[0]
    }

    /// Backpropagates `d_loss/d_output` through stored activations, returning
    /// weight gradients, bias gradients, and the gradient w.r.t. the input.
    pub fn backprop(
        &self,
        acts: &[Vec<f64>],
        d_out: f64,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let n_layers = self.n_layers();
        let mut grad_w: Vec<Vec<f64>> =
            self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> =
            self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        // delta holds d_loss/d_z for the current layer (z = pre-activation).
        let mut delta = vec![d_out];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.arch[l], self.arch[l + 1]);
            let prev = &acts[l];
            for o in 0..n_out {
                grad_b[l][o] = delta[o];
                for i in 0..n_in {
                    grad_w[l][o * n_in + i] = delta[o] * prev[i];
                }
            }
            // propagate to the previous layer through W^T, then through tanh'
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                for (ni, w) in next.iter_mut().zip(row) {
                    *ni += delta[o] * w;
                }
            }
            if l > 0 {
                // acts[l] are tanh outputs of layer l; tanh' = 1 - a^2
                for (ni, a) in next.iter_mut().zip(&acts[l]) {
                    *ni *= 1.0 - a * a;
                }
            }
            delta = next;
        }
        let grad_input = delta;
        (grad_w, grad_b, grad_input)
    }
}

/// Adam state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One descent step in place: `params -= lr * mhat / (sqrt(vhat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / b1t;
            let vhat = *v / b2t;
            *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Flattens layered gradients into one parameter vector (weights then biases).
pub fn flatten(grad_w: &[Vec<f64>], grad_b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grad_w {
        out.extend_from_slice(g);
    }
    for g in grad_b {
        out.extend_from_slice(g);
    }
    out
}

/// Writes a flat parameter vector back into layered storage.
pub fn unflatten(flat: &[f64], w: &mut [Vec<f64>], b: &mut [Vec<f64>]) {
    let mut k = 0;
    for g in w.iter_mut() {
        let len = g.len();
        g.copy_from_slice(&flat[k..k + len]);
        k += len;
    }
    for g in b.iter_mut() {
        let len = g.len();
        g.copy_from_slice(&flat[k..k + len]);
        k += len;
    }
}

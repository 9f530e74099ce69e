//! Deterministic neural-network surrogate for a single PC score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::mlp::{flatten, unflatten, Adam, Mlp, Normalization};

/// Default architecture: 4 inputs, hidden 10/20/10, one output neuron.
pub const DEFAULT_ARCH: [usize; 5] = [4, 10, 20, 10, 1];

/// Training hyperparameters. The defaults are the artifact-wide optimizer
/// contract: Adam at 1e-3, mini-batch 32, at most 5000 epochs, early stop
/// after 200 validation checks without improvement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Vec<usize>,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl TrainConfig {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        let mut arch = DEFAULT_ARCH.to_vec();
        arch[0] = input_dim;
        TrainConfig {
            arch,
            seed,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 5000,
            patience: 200,
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Trained deterministic surrogate: network plus input/output normalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DnnModel {
    pub net: Mlp,
    pub x_norm: Normalization,
    pub y_norm: Normalization,
    #[serde(skip)]
    pub log: Vec<EpochLog>,
}

impl DnnModel {
    /// De-normalized prediction; a pure forward pass.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let xn = self.x_norm.apply(x);
        self.y_norm.invert_scalar(self.net.output(&xn))
    }

    /// Gradient of the de-normalized output w.r.t. the raw input, by
    /// backpropagation through the normalizations.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        let xn = self.x_norm.apply(x);
        let acts = self.net.forward(&xn);
        let (_, _, gx) = self.net.backprop(&acts, 1.0);
        gx.iter()
            .zip(&self.x_norm.std)
            .map(|(g, s)| g * self.y_norm.std[0] / s)
            .collect()
    }
}

fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::argument(format!(
            "X has {} rows but y has {} values",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::argument("X rows have unequal lengths"));
    }
    Ok(d)
}

fn mse(net: &Mlp, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let r = net.output(xi) - yi;
        acc += r * r;
    }
    acc / x.len() as f64
}

/// Trains a scalar-output network on `(x, y)` with early stopping on the
/// validation pair. Deterministic for a fixed seed.
pub fn train_dnn(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_val: &[Vec<f64>],
    y_val: &[f64],
    config: &TrainConfig,
) -> Result<DnnModel> {
    let d = check_xy(x_train, y_train)?;
    check_xy(x_val, y_val)?;
    if config.arch[0] != d {
        return Err(Error::argument(format!(
            "architecture expects {} inputs but X has {d}",
            config.arch[0]
        )));
    }
    Mlp::check_arch(&config.arch)?;

    let x_norm = Normalization::fit(x_train);
    let y_rows: Vec<Vec<f64>> = y_train.iter().map(|v| vec![*v]).collect();
    let y_norm = Normalization::fit(&y_rows);

    let xn: Vec<Vec<f64>> = x_train.iter().map(|r| x_norm.apply(r)).collect();
    let yn: Vec<f64> = y_train.iter().map(|v| y_norm.apply_scalar(*v)).collect();
    let xv: Vec<Vec<f64>> = x_val.iter().map(|r| x_norm.apply(r)).collect();
    let yv: Vec<f64> = y_val.iter().map(|v| y_norm.apply_scalar(*v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Mlp::init_xavier(&config.arch, &mut rng)?;
    let n_params = net.n_weights() + net.biases.iter().map(Vec::len).sum::<usize>();
    let mut opt = Adam::new(n_params, config.learning_rate);

    let n = xn.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = net.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0;
    let mut log = Vec::new();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let mut gw: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
            let mut gb: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
            for &i in chunk {
                let acts = net.forward(&xn[i]);
                let out = acts.last().unwrap()[0];
                let d_out = 2.0 * (out - yn[i]) / chunk.len() as f64;
                let (dw, db, _) = net.backprop(&acts, d_out);
                for (g, d) in gw.iter_mut().zip(&dw) {
                    for (a, b) in g.iter_mut().zip(d) {
                        *a += b;
                    }
                }
                for (g, d) in gb.iter_mut().zip(&db) {
                    for (a, b) in g.iter_mut().zip(d) {
                        *a += b;
                    }
                }
            }
            let grads = flatten(&gw, &gb);
            let mut params = flatten(&net.weights, &net.biases);
            opt.step(&mut params, &grads);
            unflatten(&params, &mut net.weights, &mut net.biases);
        }
        let train_loss = mse(&net, &xn, &yn);
        let val_loss = mse(&net, &xv, &yv);
        log.push(EpochLog { epoch, train_loss, val_loss });
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::training(format!(
                "loss diverged at epoch {epoch}: train {train_loss}, val {val_loss}"
            )));
        }
        if val_loss < best_val - 1e-12 {
            best_val = val_loss;
            best = net.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    Ok(DnnModel { net: best, x_norm, y_norm, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::r_squared;

    fn linear_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 1.5 * r[0] - 0.7 * r[1] + 0.3 * r[2] + 2.0 * r[3] + 4.0)
            .collect();
        (x, y)
    }

    #[test]
    fn learns_linear_target() {
        let (x, y) = linear_data(350, 1);
        let (xv, yv) = linear_data(75, 2);
        let (xt, yt) = linear_data(75, 3);
        let cfg = TrainConfig::new(4, 7);
        let model = train_dnn(&x, &y, &xv, &yv, &cfg).unwrap();
        let pred: Vec<f64> = xt.iter().map(|r| model.predict(r)).collect();
        let r2 = r_squared(&yt, &pred).unwrap();
        assert!(r2 >= 0.99, "r2 = {r2}");
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (x, mut y) = linear_data(20, 1);
        y.pop();
        let cfg = TrainConfig::new(4, 7);
        assert!(matches!(
            train_dnn(&x, &y, &x, &y, &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = linear_data(60, 4);
        let mut cfg = TrainConfig::new(4, 11);
        cfg.max_epochs = 50;
        let a = train_dnn(&x, &y, &x, &y, &cfg).unwrap();
        let b = train_dnn(&x, &y, &x, &y, &cfg).unwrap();
        assert_eq!(a.net.weights, b.net.weights);
        let p = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(a.predict(&p), b.predict(&p));
    }

    #[test]
    fn zero_weight_network_outputs_denormalized_bias() {
        let (x, y) = linear_data(30, 5);
        let cfg = TrainConfig::new(4, 1);
        let mut model = train_dnn(&x, &y, &x, &y, &cfg).unwrap();
        for w in model.net.weights.iter_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in model.net.biases.iter_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        let out_bias = 0.25;
        *model.net.biases.last_mut().unwrap() = vec![out_bias];
        let expect = model.y_norm.invert_scalar(out_bias);
        assert_eq!(model.predict(&[0.3, 4.0, 1.0, 2.0]), expect);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let (x, y) = linear_data(120, 6);
        let mut cfg = TrainConfig::new(4, 3);
        cfg.max_epochs = 300;
        let model = train_dnn(&x, &y, &x, &y, &cfg).unwrap();
        let p = [1.2, 3.3, 0.4, 2.8];
        let grad = model.input_gradient(&p);
        let h = 1e-5;
        for d in 0..4 {
            let mut pp = p;
            pp[d] += h;
            let mut pm = p;
            pm[d] -= h;
            let fd = (model.predict(&pp) - model.predict(&pm)) / (2.0 * h);
            let denom = fd.abs().max(grad[d].abs()).max(1e-8);
            assert!(
                ((fd - grad[d]) / denom).abs() < 1e-5,
                "dim {d}: fd {fd} vs {g}",
                g = grad[d]
            );
        }
    }
}

//! Bayesian neural-network surrogate trained by mean-field variational
//! inference.
//!
//! Every weight carries a Gaussian variational posterior (mean and log-std)
//! against a standard-normal prior; biases stay deterministic. Training
//! maximizes the evidence lower bound
//!
//! `ELBO = E_q[log p(y | w)] - KL(q(w) || N(0, I))`
//!
//! with a single reparameterized weight draw per gradient step, a Gaussian
//! likelihood whose observation noise is a learned free parameter, and the
//! same Adam contract as the deterministic network. Prediction draws weights
//! from the posterior and reports the sample mean and std of the outputs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::dnn::{DnnModel, TrainConfig};
use crate::surrogate::mlp::{Adam, Mlp, Normalization};

/// Default posterior draws per prediction.
pub const DEFAULT_PREDICT_DRAWS: usize = 200;

/// Log-std assignment that collapses the posterior onto its mean.
pub const LOG_STD_COLLAPSED: f64 = -745.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnnModel {
    pub arch: Vec<usize>,
    /// Variational weight means, layered like [`Mlp::weights`].
    pub weight_mean: Vec<Vec<f64>>,
    /// Variational weight log-stds, same shape.
    pub weight_log_std: Vec<Vec<f64>>,
    /// Deterministic biases.
    pub biases: Vec<Vec<f64>>,
    /// Learned observation-noise log-std (normalized target units).
    pub log_obs_std: f64,
    pub x_norm: Normalization,
    pub y_norm: Normalization,
    /// Per-step single-draw ELBO estimates from training.
    #[serde(skip)]
    pub elbo_log: Vec<f64>,
}

impl BnnModel {
    /// Closed-form KL between the variational posterior and the unit-normal
    /// prior, summed over weights.
    pub fn kl_divergence(&self) -> f64 {
        let mut acc = 0.0;
        for (mus, rhos) in self.weight_mean.iter().zip(&self.weight_log_std) {
            for (mu, rho) in mus.iter().zip(rhos) {
                let var = (2.0 * rho).exp();
                acc += 0.5 * (mu * mu + var - 1.0) - rho;
            }
        }
        acc
    }

    /// Deterministic network at the posterior means; shares the forward code
    /// path, so a collapsed posterior reproduces it exactly.
    pub fn mean_network(&self) -> DnnModel {
        DnnModel {
            net: Mlp {
                arch: self.arch.clone(),
                weights: self.weight_mean.clone(),
                biases: self.biases.clone(),
            },
            x_norm: self.x_norm.clone(),
            y_norm: self.y_norm.clone(),
            log: Vec::new(),
        }
    }

    /// Collapses every weight posterior onto its mean.
    pub fn set_zero_spread(&mut self) {
        for rhos in self.weight_log_std.iter_mut() {
            rhos.iter_mut().for_each(|r| *r = LOG_STD_COLLAPSED);
        }
    }

    fn sample_network(&self, rng: &mut ChaCha8Rng) -> Mlp {
        let weights = self
            .weight_mean
            .iter()
            .zip(&self.weight_log_std)
            .map(|(mus, rhos)| {
                mus.iter()
                    .zip(rhos)
                    .map(|(mu, rho)| {
                        let eps: f64 = rng.sample(StandardNormal);
                        mu + rho.exp() * eps
                    })
                    .collect()
            })
            .collect();
        Mlp { arch: self.arch.clone(), weights, biases: self.biases.clone() }
    }
}

/// Draws `n_draws` weight samples, forward-passes each, and returns the
/// sample mean and std of the de-normalized outputs. Pure for a fixed seed.
pub fn bnn_predict(model: &BnnModel, x: &[f64], n_draws: usize, seed: u64) -> Result<(f64, f64)> {
    if n_draws < 2 {
        return Err(Error::argument("bnn_predict needs n_draws >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xn = model.x_norm.apply(x);
    let mut outs = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let net = model.sample_network(&mut rng);
        outs.push(model.y_norm.invert_scalar(net.output(&xn)));
    }
    // A collapsed posterior yields bitwise-identical draws; report the exact
    // degenerate statistics instead of the formula's rounding residue.
    if outs.windows(2).all(|w| w[0] == w[1]) {
        return Ok((outs[0], 0.0));
    }
    let mean = outs.iter().sum::<f64>() / n_draws as f64;
    let var =
        outs.iter().map(|o| (o - mean).powi(2)).sum::<f64>() / (n_draws - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Trains the variational posterior on `(x, y)` with early stopping on the
/// mean-network validation MSE. Deterministic for a fixed seed.
pub fn train_bnn(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_val: &[Vec<f64>],
    y_val: &[f64],
    config: &TrainConfig,
) -> Result<BnnModel> {
    if x_train.is_empty() || x_train.len() != y_train.len() {
        return Err(Error::argument("X and y lengths differ"));
    }
    if config.arch[0] != x_train[0].len() {
        return Err(Error::argument("architecture does not match input dimension"));
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
    let init = Mlp::init_xavier(&config.arch, &mut rng)?;
    let n_w = init.n_weights();
    let n_b: usize = init.biases.iter().map(Vec::len).sum();

    let mut model = BnnModel {
        arch: config.arch.clone(),
        weight_mean: init.weights.clone(),
        weight_log_std: init
            .weights
            .iter()
            .map(|w| vec![(0.05_f64).ln(); w.len()])
            .collect(),
        biases: init.biases.clone(),
        log_obs_std: (0.5_f64).ln(),
        x_norm,
        y_norm,
        elbo_log: Vec::new(),
    };

    // Flat parameter layout: weight means, weight log-stds, biases, noise.
    let n_params = 2 * n_w + n_b + 1;
    let mut opt = Adam::new(n_params, config.learning_rate);
    let n = xn.len() as f64;
    let mut order: Vec<usize> = (0..xn.len()).collect();

    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    for _epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let scale = n / chunk.len() as f64;
            let obs_std = model.log_obs_std.exp();
            let obs_var = obs_std * obs_std;

            // One reparameterized draw shared by the whole batch.
            let eps: Vec<Vec<f64>> = model
                .weight_mean
                .iter()
                .map(|w| (0..w.len()).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let weights: Vec<Vec<f64>> = model
                .weight_mean
                .iter()
                .zip(&model.weight_log_std)
                .zip(&eps)
                .map(|((mus, rhos), es)| {
                    mus.iter()
                        .zip(rhos.iter().zip(es))
                        .map(|(mu, (rho, e))| mu + rho.exp() * e)
                        .collect()
                })
                .collect();
            let net =
                Mlp { arch: model.arch.clone(), weights, biases: model.biases.clone() };

            let mut gw: Vec<Vec<f64>> =
                net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
            let mut gb: Vec<Vec<f64>> =
                net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
            let mut g_log_obs = 0.0;
            let mut log_lik = 0.0;
            for &i in chunk {
                let acts = net.forward(&xn[i]);
                let out = acts.last().unwrap()[0];
                let r = out - yn[i];
                log_lik += -0.5 * (2.0 * std::f64::consts::PI).ln()
                    - model.log_obs_std
                    - r * r / (2.0 * obs_var);
                // d(-ELBO)/d out = scale * r / obs_var
                let (dw, db, _) = net.backprop(&acts, scale * r / obs_var);
                for (g, d) in gw.iter_mut().zip(&dw) {
                    g.iter_mut().zip(d).for_each(|(a, b)| *a += b);
                }
                for (g, d) in gb.iter_mut().zip(&db) {
                    g.iter_mut().zip(d).for_each(|(a, b)| *a += b);
                }
                g_log_obs += scale * (1.0 - r * r / obs_var);
            }

            let kl = model.kl_divergence();
            if !log_lik.is_finite() || !kl.is_finite() {
                return Err(Error::training("ELBO diverged".to_string()));
            }
            model.elbo_log.push(scale * log_lik - kl);

            // Assemble flat gradient: means, log-stds, biases, noise.
            let mut grads = Vec::with_capacity(n_params);
            for (l, g) in gw.iter().enumerate() {
                for (k, gwk) in g.iter().enumerate() {
                    grads.push(gwk + model.weight_mean[l][k]);
                }
            }
            for (l, g) in gw.iter().enumerate() {
                for (k, gwk) in g.iter().enumerate() {
                    let rho = model.weight_log_std[l][k];
                    let sigma = rho.exp();
                    grads.push(gwk * eps[l][k] * sigma + (sigma * sigma - 1.0));
                }
            }
            for g in &gb {
                grads.extend_from_slice(g);
            }
            grads.push(g_log_obs);

            let mut params = Vec::with_capacity(n_params);
            for w in &model.weight_mean {
                params.extend_from_slice(w);
            }
            for r in &model.weight_log_std {
                params.extend_from_slice(r);
            }
            for b in &model.biases {
                params.extend_from_slice(b);
            }
            params.push(model.log_obs_std);

            opt.step(&mut params, &grads);

            let mut k = 0;
            for w in model.weight_mean.iter_mut() {
                let len = w.len();
                w.copy_from_slice(&params[k..k + len]);
                k += len;
            }
            for r in model.weight_log_std.iter_mut() {
                let len = r.len();
                r.copy_from_slice(&params[k..k + len]);
                k += len;
            }
            for b in model.biases.iter_mut() {
                let len = b.len();
                b.copy_from_slice(&params[k..k + len]);
                k += len;
            }
            model.log_obs_std = params[k].clamp(-10.0, 5.0);
        }

        // Early stopping on the mean network's validation MSE.
        let mean_net =
            Mlp { arch: model.arch.clone(), weights: model.weight_mean.clone(), biases: model.biases.clone() };
        let val_mse = xv
            .iter()
            .zip(&yv)
            .map(|(x, y)| (mean_net.output(x) - y).powi(2))
            .sum::<f64>()
            / xv.len() as f64;
        if !val_mse.is_finite() {
            return Err(Error::training("validation loss diverged".to_string()));
        }
        if val_mse < best_val - 1e-12 {
            best_val = val_mse;
            best = model.clone();
            best.elbo_log = Vec::new();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let elbo_log = std::mem::take(&mut model.elbo_log);
    let mut out = best;
    out.elbo_log = elbo_log;
    Ok(out)
}

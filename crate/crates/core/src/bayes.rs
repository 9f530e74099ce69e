//! Bayesian inverse UQ: Gaussian likelihood over PC scores with
//! `sigma = sigma_exp + sigma_code`, uniform box priors, adaptive random-walk
//! Metropolis sampling, chain diagnostics, and posterior summaries.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::surrogate::SurrogateModel;

/// A map from calibration points to PC-score means and optional stds; the
/// trained surrogates implement it, and tests can substitute analytic
/// doubles.
pub trait ScoreMap {
    fn predict_scores(&self, theta: &[f64]) -> Result<(DVector<f64>, Option<DVector<f64>>)>;
    fn n_scores(&self) -> usize;
}

impl ScoreMap for SurrogateModel {
    fn predict_scores(&self, theta: &[f64]) -> Result<(DVector<f64>, Option<DVector<f64>>)> {
        self.predict(theta)
    }

    fn n_scores(&self) -> usize {
        self.n_outputs()
    }
}

/// Per-parameter uniform prior box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub bounds: Vec<(f64, f64)>,
}

impl PriorSpec {
    pub fn uniform_box(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        if lo >= hi {
            return Err(Error::argument("prior bounds must satisfy lo < hi"));
        }
        Ok(PriorSpec { bounds: vec![(lo, hi); dim] })
    }

    /// The default calibration prior: `[0, 5]` per factor.
    pub fn calibration_default() -> Self {
        PriorSpec { bounds: vec![(crate::sim::PRIOR_LO, crate::sim::PRIOR_HI); 4] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.bounds.len()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| x.is_finite() && *lo <= *x && *x <= *hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| hi - lo).collect()
    }

    /// Std of each marginal uniform prior, `width / sqrt(12)`.
    pub fn marginal_stds(&self) -> Vec<f64> {
        self.widths().iter().map(|w| w / 12f64.sqrt()).collect()
    }
}

/// Everything the likelihood needs: experimental scores, the measurement
/// covariance already mapped into PC space, the surrogate, and whether the
/// surrogate's own uncertainty enters the covariance.
pub struct LikelihoodSpec<'a> {
    pub data_scores: DVector<f64>,
    pub sigma_exp_pc: DMatrix<f64>,
    pub surrogate: &'a dyn ScoreMap,
    pub use_code_uncertainty: bool,
}

impl LikelihoodSpec<'_> {
    pub fn validate(&self) -> Result<()> {
        let k = self.data_scores.len();
        if self.sigma_exp_pc.nrows() != k || self.sigma_exp_pc.ncols() != k {
            return Err(Error::argument("sigma_exp dimensions do not match scores"));
        }
        if self.surrogate.n_scores() != k {
            return Err(Error::argument("surrogate output dimension mismatch"));
        }
        let scale = self
            .sigma_exp_pc
            .iter()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
            .max(1.0);
        for r in 0..k {
            for c in (r + 1)..k {
                if (self.sigma_exp_pc[(r, c)] - self.sigma_exp_pc[(c, r)]).abs() > 1e-8 * scale {
                    return Err(Error::argument("sigma_exp must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Quadratic form and log-determinant of a Gaussian residual:
/// returns `(r^T sigma^-1 r, log det sigma)`.
pub fn gaussian_quad_and_logdet(sigma: &DMatrix<f64>, resid: &DVector<f64>) -> Result<(f64, f64)> {
    let chol = Cholesky::new(sigma.clone())
        .ok_or_else(|| Error::numeric("likelihood covariance not positive definite"))?;
    let solved = chol.solve(resid);
    let quad = resid.dot(&solved);
    let logdet: f64 = (0..sigma.nrows())
        .map(|i| 2.0 * chol.l()[(i, i)].ln())
        .sum();
    Ok((quad, logdet))
}

/// Unnormalized log posterior: `-inf` outside the prior box, otherwise
/// `-1/2 log|sigma| - 1/2 r^T sigma^-1 r` with
/// `sigma = sigma_exp + diag(surrogate stds^2)` when code uncertainty is on.
/// The log-determinant term matters because `sigma` varies with theta.
pub fn log_posterior(theta: &[f64], spec: &LikelihoodSpec<'_>, prior: &PriorSpec) -> Result<f64> {
    if !prior.contains(theta) {
        return Ok(f64::NEG_INFINITY);
    }
    let (means, stds) = spec.surrogate.predict_scores(theta)?;
    let mut sigma = spec.sigma_exp_pc.clone();
    if spec.use_code_uncertainty {
        if let Some(stds) = stds {
            for (i, s) in stds.iter().enumerate() {
                sigma[(i, i)] += s * s;
            }
        }
    }
    let resid = &spec.data_scores - &means;
    let (quad, logdet) = gaussian_quad_and_logdet(&sigma, &resid)?;
    Ok(-0.5 * logdet - 0.5 * quad)
}

/// Adaptive Metropolis settings. Defaults follow the sampling protocol:
/// 25,000 samples, 5,000 burn-in, thinning stride 20 (1,000 retained),
/// adaptation from step 500 to the end of burn-in with scale `2.4^2 / d`
/// and `1e-6 I` regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_start: usize,
    pub regularization: f64,
    /// Initial per-dimension proposal std before adaptation kicks in.
    pub initial_proposal_std: Option<Vec<f64>>,
}

impl McmcConfig {
    pub fn new(seed: u64) -> Self {
        McmcConfig {
            n_samples: 25_000,
            burn_in: 5_000,
            thin: 20,
            seed,
            adapt_start: 500,
            regularization: 1e-6,
            initial_proposal_std: None,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.n_samples == 0 || self.thin == 0 {
            return Err(Error::argument("n_samples and thin must be positive"));
        }
        if self.burn_in >= self.n_samples {
            return Err(Error::argument("burn_in must be below n_samples"));
        }
        if self.adapt_start > self.burn_in {
            return Err(Error::argument("adapt_start must not exceed burn_in"));
        }
        if let Some(s) = &self.initial_proposal_std {
            if s.len() != dim || s.iter().any(|x| *x <= 0.0) {
                return Err(Error::argument("initial proposal stds invalid"));
            }
        }
        Ok(())
    }
}

/// Raw MCMC output plus the retention policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub samples: Vec<Vec<f64>>,
    pub log_posts: Vec<f64>,
    pub accepted: Vec<bool>,
    pub burn_in: usize,
    pub thin: usize,
    /// Acceptance fraction after adaptation froze (post burn-in).
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl PosteriorChain {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Every `thin`-th sample after burn-in: exactly
    /// `floor((n - burn_in) / thin)` rows.
    pub fn retained(&self) -> Vec<&[f64]> {
        let n = self.samples.len();
        let count = (n - self.burn_in) / self.thin;
        (0..count)
            .map(|k| self.samples[self.burn_in + (k + 1) * self.thin - 1].as_slice())
            .collect()
    }

    pub fn retained_column(&self, dim: usize) -> Vec<f64> {
        self.retained().iter().map(|s| s[dim]).collect()
    }
}

/// Gaussian random-walk Metropolis with proposal covariance adapted from the
/// running sample covariance (scaled by `2.4^2/d`, regularized), frozen at
/// the end of burn-in. Bit-reproducible for a fixed seed.
pub fn adaptive_mcmc(
    logpost: &dyn Fn(&[f64]) -> Result<f64>,
    init: &[f64],
    config: &McmcConfig,
) -> Result<PosteriorChain> {
    let d = init.len();
    if d == 0 {
        return Err(Error::argument("empty initial state"));
    }
    config.validate(d)?;
    let mut lp = logpost(init)?;
    if !lp.is_finite() {
        return Err(Error::argument(
            "log posterior at the initial point is not finite",
        ));
    }

    let scale = 2.4 * 2.4 / d as f64;
    let init_std = config
        .initial_proposal_std
        .clone()
        .unwrap_or_else(|| vec![1.0; d]);

    // Running moments for adaptation (Welford).
    let mut run_mean = vec![0.0; d];
    let mut run_m2 = DMatrix::<f64>::zeros(d, d);
    let mut n_seen = 0usize;
    let push_sample =
        |x: &[f64], run_mean: &mut [f64], run_m2: &mut DMatrix<f64>, n_seen: &mut usize| {
            *n_seen += 1;
            let nf = *n_seen as f64;
            let delta: Vec<f64> = x.iter().zip(run_mean.iter()).map(|(a, b)| a - b).collect();
            for (m, dv) in run_mean.iter_mut().zip(&delta) {
                *m += dv / nf;
            }
            let delta2: Vec<f64> = x.iter().zip(run_mean.iter()).map(|(a, b)| a - b).collect();
            for r in 0..d {
                for c in 0..d {
                    run_m2[(r, c)] += delta[r] * delta2[c];
                }
            }
        };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = init.to_vec();
    push_sample(&x, &mut run_mean, &mut run_m2, &mut n_seen);

    let mut prop_chol: Option<Cholesky<f64, nalgebra::Dyn>> = None;
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut log_posts = Vec::with_capacity(config.n_samples);
    let mut accepted_flags = Vec::with_capacity(config.n_samples);
    let mut accepted_after_burnin = 0usize;

    for t in 0..config.n_samples {
        // Refresh the adapted proposal while inside the adaptation window.
        if t >= config.adapt_start && t < config.burn_in && n_seen > 1 {
            let mut cov = run_m2.clone() / (n_seen - 1) as f64;
            for i in 0..d {
                cov[(i, i)] += config.regularization;
            }
            cov *= scale;
            prop_chol = Cholesky::new(cov).or(prop_chol);
        }

        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let step: Vec<f64> = match &prop_chol {
            Some(chol) => {
                let s = chol.l() * DVector::from_vec(z);
                s.iter().copied().collect()
            }
            None => z.iter().zip(&init_std).map(|(a, b)| a * b).collect(),
        };
        let proposal: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        let lp_prop = logpost(&proposal)?;
        let u: f64 = rng.random();
        let accept = lp_prop.is_finite() && u.ln() < lp_prop - lp;
        if accept {
            x = proposal;
            lp = lp_prop;
        }
        samples.push(x.clone());
        log_posts.push(lp);
        accepted_flags.push(accept);
        if t >= config.burn_in && accept {
            accepted_after_burnin += 1;
        }
        push_sample(&x, &mut run_mean, &mut run_m2, &mut n_seen);
    }

    let post_steps = (config.n_samples - config.burn_in).max(1);
    Ok(PosteriorChain {
        samples,
        log_posts,
        accepted: accepted_flags,
        burn_in: config.burn_in,
        thin: config.thin,
        acceptance_rate: accepted_after_burnin as f64 / post_steps as f64,
        seed: config.seed,
    })
}

/// Per-parameter summary in the reporting schema: mean, std, and the
/// empirical 95% credible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub std: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Moments and 2.5/97.5% quantiles of the retained samples, per parameter.
pub fn posterior_summary(chain: &PosteriorChain) -> Result<Vec<ParamSummary>> {
    let retained = chain.retained();
    if retained.len() < 10 {
        return Err(Error::argument("posterior_summary needs >= 10 retained samples"));
    }
    let d = chain.dim();
    Ok((0..d)
        .map(|j| {
            let col: Vec<f64> = retained.iter().map(|s| s[j]).collect();
            ParamSummary {
                mean: stats::mean(&col),
                std: stats::std_dev(&col),
                ci_lower: stats::quantile_of(&col, 0.025),
                ci_upper: stats::quantile_of(&col, 0.975),
            }
        })
        .collect())
}

/// Convergence diagnostics over one or more chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance: f64,
    /// Split R-hat per parameter (floored at 1).
    pub split_rhat: Vec<f64>,
    /// Integrated autocorrelation time per parameter.
    pub autocorr_time: Vec<f64>,
}

fn split_rhat_1d(sequences: &[Vec<f64>]) -> f64 {
    let m = sequences.len() as f64;
    let n = sequences[0].len() as f64;
    let seq_means: Vec<f64> = sequences.iter().map(|s| stats::mean(s)).collect();
    let grand = stats::mean(&seq_means);
    let b = n / (m - 1.0)
        * seq_means
            .iter()
            .map(|x| (x - grand).powi(2))
            .sum::<f64>();
    let w = sequences
        .iter()
        .map(|s| {
            let mu = stats::mean(s);
            s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let v_hat = (n - 1.0) / n * w + b / n;
    (v_hat / w).max(1.0).sqrt()
}

/// Integrated autocorrelation time by Geyer's initial-positive-sequence
/// estimator.
fn autocorr_time_1d(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mu = stats::mean(xs);
    let c0 = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let rho = |k: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - k {
            acc += (xs[i] - mu) * (xs[i + k] - mu);
        }
        acc / (n as f64) / c0
    };
    let mut tau = 1.0;
    let mut k = 1;
    while k + 1 < n {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    tau
}

/// Split R-hat, averaged acceptance, and autocorrelation time over the
/// retained samples of the given chains. A single chain is split in half.
pub fn chain_diagnostics(chains: &[&PosteriorChain]) -> Result<ChainDiagnostics> {
    if chains.is_empty() {
        return Err(Error::argument("chain_diagnostics needs at least one chain"));
    }
    let d = chains[0].dim();
    if chains.iter().any(|c| c.dim() != d) {
        return Err(Error::argument("chains have mismatched dimensions"));
    }
    let retained: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| c.retained().iter().map(|s| s.to_vec()).collect())
        .collect();
    if retained.iter().any(|r| r.len() < 4) {
        return Err(Error::argument("chains too short for diagnostics"));
    }

    let mut split_rhat = Vec::with_capacity(d);
    let mut autocorr = Vec::with_capacity(d);
    let min_half = retained.iter().map(|r| r.len() / 2).min().unwrap();
    for j in 0..d {
        let mut sequences: Vec<Vec<f64>> = Vec::new();
        for r in &retained {
            let col: Vec<f64> = r.iter().map(|s| s[j]).collect();
            sequences.push(col[..min_half].to_vec());
            sequences.push(col[col.len() - min_half..].to_vec());
        }
        split_rhat.push(split_rhat_1d(&sequences));
        let tau = retained
            .iter()
            .map(|r| {
                let col: Vec<f64> = r.iter().map(|s| s[j]).collect();
                autocorr_time_1d(&col)
            })
            .sum::<f64>()
            / retained.len() as f64;
        autocorr.push(tau);
    }
    let acceptance =
        chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64;
    Ok(ChainDiagnostics { acceptance, split_rhat, autocorr_time: autocorr })
}

/// Pearson correlations of the retained samples. Parameters with zero
/// variance are reported in the second return value and their off-diagonal
/// entries are NaN.
pub fn parameter_correlations(chain: &PosteriorChain) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let retained = chain.retained();
    if retained.len() < 10 {
        return Err(Error::argument(
            "parameter_correlations needs >= 10 retained samples",
        ));
    }
    let d = chain.dim();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| retained.iter().map(|s| s[j]).collect())
        .collect();
    let degenerate: Vec<usize> = (0..d)
        .filter(|j| stats::std_dev(&cols[*j]) == 0.0)
        .collect();
    let mut out = DMatrix::zeros(d, d);
    for r in 0..d {
        out[(r, r)] = 1.0;
        for c in (r + 1)..d {
            let v = stats::pearson(&cols[r], &cols[c]).unwrap_or(f64::NAN);
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
    }
    Ok((out, degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analytic score map: means copy theta components, stds optional.
    struct LinearMap {
        k: usize,
        stds: Option<Vec<f64>>,
    }

    impl ScoreMap for LinearMap {
        fn predict_scores(
            &self,
            theta: &[f64],
        ) -> Result<(DVector<f64>, Option<DVector<f64>>)> {
            let means =
                DVector::from_iterator(self.k, (0..self.k).map(|i| theta[i % theta.len()]));
            let stds = self.stds.clone().map(DVector::from_vec);
            Ok((means, stds))
        }

        fn n_scores(&self) -> usize {
            self.k
        }
    }

    #[test]
    fn outside_prior_is_neg_infinity() {
        let map = LinearMap { k: 1, stds: None };
        let spec = LikelihoodSpec {
            data_scores: DVector::zeros(1),
            sigma_exp_pc: DMatrix::identity(1, 1),
            surrogate: &map,
            use_code_uncertainty: false,
        };
        let prior = PriorSpec::calibration_default();
        let lp = log_posterior(&[6.0, 1.0, 1.0, 1.0], &spec, &prior).unwrap();
        assert_eq!(lp, f64::NEG_INFINITY);
    }

    #[test]
    fn one_dimensional_gaussian_exponent_difference() {
        let map = LinearMap { k: 1, stds: None };
        let spec = LikelihoodSpec {
            data_scores: DVector::zeros(1),
            sigma_exp_pc: DMatrix::identity(1, 1),
            surrogate: &map,
            use_code_uncertainty: false,
        };
        spec.validate().unwrap();
        let prior = PriorSpec::calibration_default();
        let t0 = [0.5, 0.0, 0.0, 0.0];
        let t1 = [2.0, 0.0, 0.0, 0.0];
        let lp0 = log_posterior(&t0, &spec, &prior).unwrap();
        let lp1 = log_posterior(&t1, &spec, &prior).unwrap();
        // r = -theta[0], sigma = 1: difference is -(r1^2 - r0^2)/2
        let expect = -0.5 * (4.0 - 0.25);
        assert!((lp1 - lp0 - expect).abs() < 1e-12);
    }

    #[test]
    fn code_uncertainty_shrinks_quadratic_penalty() {
        let resid = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let sigma0 = DMatrix::identity(3, 3);
        let mut sigma1 = sigma0.clone();
        for i in 0..3 {
            sigma1[(i, i)] += 0.4 * 0.4;
        }
        let (q0, _) = gaussian_quad_and_logdet(&sigma0, &resid).unwrap();
        let (q1, _) = gaussian_quad_and_logdet(&sigma1, &resid).unwrap();
        assert!(q1 < q0);
    }

    #[test]
    fn non_psd_sigma_is_numeric_error() {
        let mut sigma = DMatrix::identity(2, 2);
        sigma[(0, 0)] = -1.0;
        let r = DVector::zeros(2);
        assert!(matches!(
            gaussian_quad_and_logdet(&sigma, &r),
            Err(Error::Numeric(_))
        ));
    }

    fn gaussian_target(theta: &[f64]) -> Result<f64> {
        Ok(-0.5 * theta.iter().map(|x| x * x).sum::<f64>())
    }

    #[test]
    fn recovers_standard_gaussian_moments() {
        let cfg = McmcConfig::new(42);
        let chain = adaptive_mcmc(&gaussian_target, &[0.5, -0.5, 0.2, 0.0], &cfg).unwrap();
        assert_eq!(chain.retained().len(), 1000);
        let summary = posterior_summary(&chain).unwrap();
        for s in &summary {
            assert!(s.mean.abs() < 0.1, "mean {}", s.mean);
            assert!((s.std - 1.0).abs() < 0.1, "std {}", s.std);
        }
        assert!(
            (0.1..=0.5).contains(&chain.acceptance_rate),
            "acceptance {}",
            chain.acceptance_rate
        );
    }

    #[test]
    fn identical_seeds_identical_chains() {
        let cfg = McmcConfig { n_samples: 2000, burn_in: 500, ..McmcConfig::new(7) };
        let a = adaptive_mcmc(&gaussian_target, &[0.0; 4], &cfg).unwrap();
        let b = adaptive_mcmc(&gaussian_target, &[0.0; 4], &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.accepted, b.accepted);
    }

    #[test]
    fn rejects_infinite_start() {
        let prior = PriorSpec::uniform_box(0.0, 1.0, 2).unwrap();
        let lp = move |t: &[f64]| -> Result<f64> {
            Ok(if prior.contains(t) { 0.0 } else { f64::NEG_INFINITY })
        };
        let cfg = McmcConfig::new(1);
        assert!(matches!(
            adaptive_mcmc(&lp, &[2.0, 0.5], &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn chain_respects_prior_box() {
        let prior = PriorSpec::uniform_box(0.0, 5.0, 3).unwrap();
        let p2 = prior.clone();
        let lp = move |t: &[f64]| -> Result<f64> {
            Ok(if p2.contains(t) {
                -0.5 * t.iter().map(|x| (x - 2.0) * (x - 2.0)).sum::<f64>()
            } else {
                f64::NEG_INFINITY
            })
        };
        let cfg = McmcConfig { n_samples: 3000, burn_in: 500, ..McmcConfig::new(3) };
        let chain = adaptive_mcmc(&lp, &[2.5, 2.5, 2.5], &cfg).unwrap();
        for s in &chain.samples {
            assert!(prior.contains(s));
        }
    }

    #[test]
    fn summary_of_constant_chain_collapses() {
        let chain = PosteriorChain {
            samples: vec![vec![1.5, 2.0]; 200],
            log_posts: vec![0.0; 200],
            accepted: vec![false; 200],
            burn_in: 0,
            thin: 1,
            acceptance_rate: 0.0,
            seed: 0,
        };
        let s = posterior_summary(&chain).unwrap();
        assert_eq!(s[0].std, 0.0);
        assert_eq!(s[0].ci_lower, 1.5);
        assert_eq!(s[0].ci_upper, 1.5);
    }

    #[test]
    fn summary_of_uniform_draws_centers_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.random::<f64>()]).collect();
        let chain = PosteriorChain {
            log_posts: vec![0.0; samples.len()],
            accepted: vec![true; samples.len()],
            samples,
            burn_in: 0,
            thin: 1,
            acceptance_rate: 0.5,
            seed: 0,
        };
        let s = posterior_summary(&chain).unwrap();
        assert!((s[0].mean - 0.5).abs() < 0.02);
    }

    fn chain_from(samples: Vec<Vec<f64>>) -> PosteriorChain {
        PosteriorChain {
            log_posts: vec![0.0; samples.len()],
            accepted: vec![true; samples.len()],
            samples,
            burn_in: 0,
            thin: 1,
            acceptance_rate: 0.3,
            seed: 0,
        }
    }

    #[test]
    fn rhat_of_mirrored_halves_is_one_exactly() {
        // A block repeated twice makes all four split sequences identical.
        let block: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 7) as f64]).collect();
        let mut samples = block.clone();
        samples.extend(block);
        let a = chain_from(samples.clone());
        let b = chain_from(samples);
        let d = chain_diagnostics(&[&a, &b]).unwrap();
        assert_eq!(d.split_rhat[0], 1.0);
    }

    #[test]
    fn rhat_iid_gaussian_near_one_and_shifted_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..2000)
                .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
                .collect()
        };
        let a = chain_from(draw(&mut rng));
        let b = chain_from(draw(&mut rng));
        let d = chain_diagnostics(&[&a, &b]).unwrap();
        assert!(d.split_rhat[0] < 1.01, "rhat {}", d.split_rhat[0]);

        let shifted = chain_from(a.samples.iter().map(|s| vec![s[0] + 5.0]).collect());
        let d2 = chain_diagnostics(&[&a, &shifted]).unwrap();
        assert!(d2.split_rhat[0] > 1.1, "rhat {}", d2.split_rhat[0]);
    }

    #[test]
    fn diagnostics_reject_short_chains() {
        let a = chain_from(vec![vec![1.0]; 3]);
        assert!(matches!(
            chain_diagnostics(&[&a]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn correlations_diag_and_antiperfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Vec<f64>> = (0..1000)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                vec![x, -x, y]
            })
            .collect();
        let chain = chain_from(samples);
        let (corr, degenerate) = parameter_correlations(&chain).unwrap();
        assert!(degenerate.is_empty());
        for i in 0..3 {
            assert_eq!(corr[(i, i)], 1.0);
        }
        assert!((corr[(0, 1)] + 1.0).abs() < 1e-12);
        assert!(corr[(0, 2)].abs() < 0.1);
    }

    #[test]
    fn correlations_flag_constant_parameter() {
        let samples: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 3.0]).collect();
        let chain = chain_from(samples);
        let (corr, degenerate) = parameter_correlations(&chain).unwrap();
        assert_eq!(degenerate, vec![1]);
        assert!(corr[(0, 1)].is_nan());
        assert_eq!(corr[(1, 1)], 1.0);
    }

    #[test]
    fn likelihood_invariant_under_consistent_permutation() {
        let map2 = LinearMap { k: 2, stds: None };
        let data = DVector::from_vec(vec![0.3, -0.8]);
        let mut sigma = DMatrix::identity(2, 2);
        sigma[(0, 0)] = 2.0;
        sigma[(1, 1)] = 0.5;
        sigma[(0, 1)] = 0.2;
        sigma[(1, 0)] = 0.2;
        let prior = PriorSpec::calibration_default();
        let spec = LikelihoodSpec {
            data_scores: data.clone(),
            sigma_exp_pc: sigma.clone(),
            surrogate: &map2,
            use_code_uncertainty: false,
        };
        let theta = [1.0, 2.0, 0.0, 0.0];
        let lp = log_posterior(&theta, &spec, &prior).unwrap();

        // permute both PC dimensions consistently
        struct Swapped;
        impl ScoreMap for Swapped {
            fn predict_scores(
                &self,
                theta: &[f64],
            ) -> Result<(DVector<f64>, Option<DVector<f64>>)> {
                Ok((DVector::from_vec(vec![theta[1], theta[0]]), None))
            }
            fn n_scores(&self) -> usize {
                2
            }
        }
        let perm_sigma = {
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 0)] = sigma[(1, 1)];
            m[(1, 1)] = sigma[(0, 0)];
            m[(0, 1)] = sigma[(1, 0)];
            m[(1, 0)] = sigma[(0, 1)];
            m
        };
        let spec2 = LikelihoodSpec {
            data_scores: DVector::from_vec(vec![data[1], data[0]]),
            sigma_exp_pc: perm_sigma,
            surrogate: &Swapped,
            use_code_uncertainty: false,
        };
        let lp2 = log_posterior(&theta, &spec2, &prior).unwrap();
        assert!((lp - lp2).abs() < 1e-12);
    }
}

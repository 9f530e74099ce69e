//! Staged orchestration of the calibration loop: ensemble generation,
//! dimensionality reduction, surrogate training, likelihood assembly, MCMC,
//! and forward propagation. The CLI drives these stages from a config file;
//! the acceptance suite drives them directly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{self, AlignedEnsemble};
use crate::bayes::{
    adaptive_mcmc, log_posterior, LikelihoodSpec, McmcConfig, PosteriorChain, PriorSpec,
};
use crate::error::{Error, Result};
use crate::pca::{self, FpcaModel, PcaModel, Truncation};
use crate::sim::{lhs_sample, simulate_pct, CalibrationVector, ExperimentalCurve, TimeGrid, TransientCurve};
use crate::stats;
use crate::surrogate::{
    bnn_predict, fit_std_shortcut, split_data, train_bnn, train_dnn, train_gp, EpochLog,
    SurrogateModel, TrainConfig, TrainTestSplit, DEFAULT_PREDICT_DRAWS, STD_FLOOR,
};

/// Dimensionality-reduction flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMethod {
    Conventional,
    Fpca,
}

/// Surrogate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Gp,
    Dnn,
    Bnn,
}

/// The four canonical method presets: (reduction, surrogate, code
/// uncertainty considered).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Method1,
    Method2,
    Method3,
    Method4,
}

impl Method {
    pub fn triple(self) -> (PcaMethod, SurrogateKind, bool) {
        match self {
            Method::Method1 => (PcaMethod::Conventional, SurrogateKind::Gp, true),
            Method::Method2 => (PcaMethod::Conventional, SurrogateKind::Dnn, false),
            Method::Method3 => (PcaMethod::Fpca, SurrogateKind::Dnn, false),
            Method::Method4 => (PcaMethod::Fpca, SurrogateKind::Bnn, true),
        }
    }

    pub fn parse(name: &str) -> Result<Method> {
        match name {
            "method1" => Ok(Method::Method1),
            "method2" => Ok(Method::Method2),
            "method3" => Ok(Method::Method3),
            "method4" => Ok(Method::Method4),
            other => Err(Error::argument(format!("unknown preset {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Method1 => "method1",
            Method::Method2 => "method2",
            Method::Method3 => "method3",
            Method::Method4 => "method4",
        }
    }
}

/// A design with its simulated responses.
#[derive(Debug, Clone)]
pub struct EnsembleData {
    pub grid: TimeGrid,
    pub thetas: Vec<CalibrationVector>,
    pub curves: Vec<TransientCurve>,
}

/// LHS design plus one simulator run per point.
pub fn generate_ensemble(
    n: usize,
    bounds: &[(f64, f64); 4],
    seed: u64,
    grid: &TimeGrid,
) -> Result<EnsembleData> {
    let thetas = lhs_sample(n, bounds, seed)?;
    let curves = thetas
        .iter()
        .map(|t| simulate_pct(t, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleData { grid: *grid, thetas, curves })
}

/// A fitted reduction: either one conventional PCA over raw curves or the
/// functional composite.
#[derive(Debug, Clone)]
pub enum ReducerModel {
    Conventional(PcaModel),
    Fpca(FpcaModel),
}

impl ReducerModel {
    pub fn n_scores(&self) -> usize {
        match self {
            ReducerModel::Conventional(m) => m.p_star(),
            ReducerModel::Fpca(m) => m.total_k(),
        }
    }

    /// Projects a measured curve into the score space the surrogates live in.
    pub fn project_curve(&self, curve: &TransientCurve) -> Result<DVector<f64>> {
        match self {
            ReducerModel::Conventional(m) => pca::project(m, &curve.values),
            ReducerModel::Fpca(m) => {
                let (amp, phase) = pca::fpca_project(m, curve)?;
                let mut v = Vec::with_capacity(amp.len() + phase.len());
                v.extend(amp.iter());
                v.extend(phase.iter());
                Ok(DVector::from_vec(v))
            }
        }
    }

    /// Reconstructs a curve from a score vector.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<TransientCurve> {
        match self {
            ReducerModel::Conventional(m) => {
                if scores.len() != m.p_star() {
                    return Err(Error::argument("score length mismatch"));
                }
                let v = pca::reconstruct(m, &DVector::from_column_slice(scores))?;
                // Conventional reconstructions may oscillate below zero on
                // the quench; the curve type requires positive temperatures.
                Ok(TransientCurve {
                    grid: TimeGrid {
                        t_start: 0.0,
                        t_end: 0.0,
                        n_points: v.len(),
                    },
                    values: v,
                })
            }
            ReducerModel::Fpca(m) => {
                let (ak, pk) = (m.amplitude_k(), m.phase_k());
                if scores.len() != ak + pk {
                    return Err(Error::argument("score length mismatch"));
                }
                let amp = DVector::from_column_slice(&scores[..ak]);
                let phase = DVector::from_column_slice(&scores[ak..]);
                pca::fpca_reconstruct(m, &amp, &phase)
            }
        }
    }

    /// Reconstructs on an explicit grid (conventional models do not carry
    /// their grid).
    pub fn reconstruct_on(&self, scores: &[f64], grid: &TimeGrid) -> Result<TransientCurve> {
        let mut c = self.reconstruct(scores)?;
        if c.values.len() != grid.n_points {
            return Err(Error::argument("grid length mismatch in reconstruction"));
        }
        c.grid = *grid;
        Ok(c)
    }

    /// Maps a diagonal curve-space measurement covariance `sigma_exp^2 I`
    /// into score space. The amplitude block follows the covariance
    /// transform; phase scores get a diagonal inflation proportional to
    /// their ensemble variance.
    pub fn sigma_exp_pc(&self, sigma_exp: f64, phase_inflation: f64) -> Result<DMatrix<f64>> {
        match self {
            ReducerModel::Conventional(m) => {
                let p = m.p();
                let sigma = DMatrix::from_diagonal_element(p, p, sigma_exp * sigma_exp);
                pca::transform_covariance(m, &sigma)
            }
            ReducerModel::Fpca(m) => {
                let p = m.amplitude_pca.p();
                let sigma = DMatrix::from_diagonal_element(p, p, sigma_exp * sigma_exp);
                let amp_block = pca::transform_covariance(&m.amplitude_pca, &sigma)?;
                let k = m.total_k();
                let ak = m.amplitude_k();
                let mut out = DMatrix::zeros(k, k);
                for r in 0..ak {
                    for c in 0..ak {
                        out[(r, c)] = amp_block[(r, c)];
                    }
                }
                for (j, var) in m.phase_pca.score_variances().iter().enumerate() {
                    out[(ak + j, ak + j)] = phase_inflation * var;
                }
                Ok(out)
            }
        }
    }
}

/// Truncation request for the reduction stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionSettings {
    /// Explicit conventional component count; falls back to the variance
    /// target when absent.
    pub conventional_k: Option<usize>,
    pub conventional_variance_target: f64,
    pub amplitude_k: usize,
    pub phase_k: usize,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        ReductionSettings {
            conventional_k: None,
            conventional_variance_target: 0.95,
            amplitude_k: 2,
            phase_k: 4,
        }
    }
}

/// Fits the requested reduction. For the functional method the ensemble is
/// aligned first and the alignment is returned for score extraction.
pub fn fit_reducer(
    method: PcaMethod,
    data: &EnsembleData,
    settings: &ReductionSettings,
) -> Result<(ReducerModel, Option<AlignedEnsemble>)> {
    match method {
        PcaMethod::Conventional => {
            let matrix = pca::DataMatrix::from_curves(&data.curves)?;
            let trunc = match settings.conventional_k {
                Some(k) => Truncation::Components(k),
                None => Truncation::VarianceFraction(settings.conventional_variance_target),
            };
            let model = pca::fit_pca(&matrix, trunc)?;
            Ok((ReducerModel::Conventional(model), None))
        }
        PcaMethod::Fpca => {
            let aligned = align::align_ensemble(&data.curves)?;
            let model = pca::fpca_fit(&aligned, settings.amplitude_k, settings.phase_k)?;
            Ok((ReducerModel::Fpca(model), Some(aligned)))
        }
    }
}

/// Training scores per design point. Conventional scores project the raw
/// curves; functional scores reuse the ensemble's own warped curves and
/// warps so phase information is exact for the training set.
pub fn training_scores(
    reducer: &ReducerModel,
    aligned: Option<&AlignedEnsemble>,
    data: &EnsembleData,
) -> Result<Vec<Vec<f64>>> {
    match reducer {
        ReducerModel::Conventional(m) => data
            .curves
            .iter()
            .map(|c| Ok(pca::project(m, &c.values)?.iter().copied().collect()))
            .collect(),
        ReducerModel::Fpca(m) => {
            let aligned = aligned
                .ok_or_else(|| Error::argument("functional scores need the aligned ensemble"))?;
            aligned
                .warped_curves
                .iter()
                .zip(&aligned.warpings)
                .map(|(w, g)| {
                    let amp = pca::project(&m.amplitude_pca, &w.values)?;
                    let phase = pca::project(&m.phase_pca, &g.gamma_values)?;
                    let mut v: Vec<f64> = amp.iter().copied().collect();
                    v.extend(phase.iter());
                    Ok(v)
                })
                .collect()
        }
    }
}

/// Quality report from surrogate training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateTrainReport {
    pub kind: SurrogateKind,
    /// Test-set R^2 per score.
    pub test_r2: Vec<f64>,
    /// Fraction of test points within one predicted std, per score
    /// (Bayesian surrogate only).
    pub within_one_std: Option<Vec<f64>>,
    /// Whether each std shortcut chose cluster mode (Bayesian only).
    pub shortcut_cluster_mode: Option<Vec<bool>>,
    /// Per-score training logs (network surrogates only).
    #[serde(skip)]
    pub logs: Vec<Vec<EpochLog>>,
}

/// Trains the configured surrogate family on the split data and evaluates
/// test-set quality.
pub fn train_surrogate_suite(
    kind: SurrogateKind,
    thetas: &[CalibrationVector],
    scores: &[Vec<f64>],
    split: &TrainTestSplit,
    seed: u64,
) -> Result<(SurrogateModel, SurrogateTrainReport)> {
    if thetas.len() != scores.len() {
        return Err(Error::argument("design and score counts differ"));
    }
    let k = scores.first().map(Vec::len).unwrap_or(0);
    if k == 0 {
        return Err(Error::argument("no scores to train on"));
    }
    let xs: Vec<Vec<f64>> = thetas.iter().map(|t| t.as_array().to_vec()).collect();
    let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            idx.iter().map(|i| xs[*i].clone()).collect(),
            idx.iter().map(|i| scores[*i].clone()).collect(),
        )
    };
    let (x_train, y_train) = take(&split.train);
    let (x_val, y_val) = take(&split.validation);
    let (x_test, y_test) = take(&split.test);
    let column = |m: &[Vec<f64>], j: usize| -> Vec<f64> { m.iter().map(|r| r[j]).collect() };

    match kind {
        SurrogateKind::Gp => {
            let model = train_gp(&x_train, &y_train, seed)?;
            let mut r2 = Vec::with_capacity(k);
            for j in 0..k {
                let truth = column(&y_test, j);
                let pred: Vec<f64> = x_test
                    .iter()
                    .map(|x| model.predict(x).map(|(m, _)| m[j]))
                    .collect::<Result<_>>()?;
                r2.push(stats::r_squared(&truth, &pred)?);
            }
            Ok((
                SurrogateModel::Gp(model),
                SurrogateTrainReport {
                    kind,
                    test_r2: r2,
                    within_one_std: None,
                    shortcut_cluster_mode: None,
                    logs: Vec::new(),
                },
            ))
        }
        SurrogateKind::Dnn => {
            let mut nets = Vec::with_capacity(k);
            let mut r2 = Vec::with_capacity(k);
            let mut logs = Vec::with_capacity(k);
            for j in 0..k {
                let cfg = TrainConfig::new(4, seed.wrapping_add(j as u64));
                let model = train_dnn(
                    &x_train,
                    &column(&y_train, j),
                    &x_val,
                    &column(&y_val, j),
                    &cfg,
                )?;
                let truth = column(&y_test, j);
                let pred: Vec<f64> = x_test.iter().map(|x| model.predict(x)).collect();
                r2.push(stats::r_squared(&truth, &pred)?);
                logs.push(model.log.clone());
                nets.push(model);
            }
            Ok((
                SurrogateModel::PerScoreDnn(nets),
                SurrogateTrainReport {
                    kind,
                    test_r2: r2,
                    within_one_std: None,
                    shortcut_cluster_mode: None,
                    logs,
                },
            ))
        }
        SurrogateKind::Bnn => {
            let mut nets = Vec::with_capacity(k);
            let mut shortcuts = Vec::with_capacity(k);
            let mut r2 = Vec::with_capacity(k);
            let mut within = Vec::with_capacity(k);
            let mut cluster_modes = Vec::with_capacity(k);
            let mut logs = Vec::with_capacity(k);
            for j in 0..k {
                let cfg = TrainConfig::new(4, seed.wrapping_add(j as u64));
                let y_col = column(&y_train, j);
                let model = train_bnn(
                    &x_train,
                    &y_col,
                    &x_val,
                    &column(&y_val, j),
                    &cfg,
                )?;
                // Posterior-draw predictions on the test set feed both the
                // quality metrics and the std shortcut.
                let truth = column(&y_test, j);
                let mut means = Vec::with_capacity(x_test.len());
                let mut stds = Vec::with_capacity(x_test.len());
                for (i, x) in x_test.iter().enumerate() {
                    let (m, s) = bnn_predict(
                        model_ref(&model),
                        x,
                        DEFAULT_PREDICT_DRAWS,
                        seed.wrapping_add(1000 + i as u64),
                    )?;
                    means.push(m);
                    stds.push(s);
                }
                r2.push(stats::r_squared(&truth, &means)?);
                let frac = truth
                    .iter()
                    .zip(means.iter().zip(&stds))
                    .filter(|(t, (m, s))| (*t - *m).abs() <= **s)
                    .count() as f64
                    / truth.len() as f64;
                within.push(frac);

                let floor = STD_FLOOR * stats::std_dev(&y_col).max(1e-12);
                let shortcut = fit_std_shortcut(&means, &stds, floor)?;
                cluster_modes.push(shortcut.is_cluster_mode());
                let elbo = model.elbo_log.clone();
                logs.push(
                    elbo.iter()
                        .enumerate()
                        .map(|(e, v)| EpochLog { epoch: e, train_loss: -v, val_loss: f64::NAN })
                        .collect(),
                );
                shortcuts.push(shortcut);
                nets.push(model);
            }
            Ok((
                SurrogateModel::PerScoreBnn { nets, shortcuts },
                SurrogateTrainReport {
                    kind,
                    test_r2: r2,
                    within_one_std: Some(within),
                    shortcut_cluster_mode: Some(cluster_modes),
                    logs,
                },
            ))
        }
    }
}

fn model_ref(m: &crate::surrogate::BnnModel) -> &crate::surrogate::BnnModel {
    m
}

/// Fully assembled inverse problem.
pub struct IuqProblem {
    pub reducer: ReducerModel,
    pub surrogate: SurrogateModel,
    pub prior: PriorSpec,
    pub sigma_exp: f64,
    pub phase_inflation: f64,
    pub use_code_uncertainty: bool,
}

/// Default measurement noise fed into the likelihood (kelvin).
pub const DEFAULT_SIGMA_EXP: f64 = 10.0;
/// Default diagonal inflation of phase-score uncertainty, as a fraction of
/// each phase score's ensemble variance.
pub const DEFAULT_PHASE_INFLATION: f64 = 0.10;

impl IuqProblem {
    /// Projects the experiment and assembles the score-space likelihood.
    pub fn likelihood_parts(
        &self,
        experiment: &ExperimentalCurve,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let data_scores = self.reducer.project_curve(&experiment.curve)?;
        let sigma = self
            .reducer
            .sigma_exp_pc(self.sigma_exp, self.phase_inflation)?;
        Ok((data_scores, sigma))
    }

    /// Runs `n_chains` adaptive Metropolis chains. Chain 0 starts at the
    /// prior midpoint; later chains jitter the start by up to 10% of the box
    /// width, seeded.
    pub fn run_chains(
        &self,
        experiment: &ExperimentalCurve,
        base: &McmcConfig,
        n_chains: usize,
    ) -> Result<Vec<PosteriorChain>> {
        let (data_scores, sigma_exp_pc) = self.likelihood_parts(experiment)?;
        let spec = LikelihoodSpec {
            data_scores,
            sigma_exp_pc,
            surrogate: &self.surrogate,
            use_code_uncertainty: self.use_code_uncertainty,
        };
        spec.validate()?;
        let logpost = |theta: &[f64]| log_posterior(theta, &spec, &self.prior);

        let widths = self.prior.widths();
        let mid = self.prior.midpoint();
        let mut chains = Vec::with_capacity(n_chains);
        for c in 0..n_chains {
            let mut cfg = base.clone();
            cfg.seed = base.seed.wrapping_add(c as u64);
            cfg.initial_proposal_std =
                Some(widths.iter().map(|w| 0.05 * w).collect());
            let init: Vec<f64> = if c == 0 {
                mid.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1a17);
                mid.iter()
                    .zip(&widths)
                    .zip(&self.prior.bounds)
                    .map(|((m, w), (lo, hi))| {
                        (m + rng.random_range(-0.1..0.1) * w).clamp(*lo, *hi)
                    })
                    .collect()
            };
            chains.push(adaptive_mcmc(&logpost, &init, &cfg)?);
        }
        Ok(chains)
    }

    /// Surrogate-path curve evaluator for forward propagation.
    pub fn surrogate_curve_eval(
        &self,
        grid: TimeGrid,
    ) -> impl Fn(&CalibrationVector) -> Result<TransientCurve> + '_ {
        move |theta: &CalibrationVector| {
            let (means, _) = self.surrogate.predict(&theta.as_array())?;
            let scores: Vec<f64> = means.iter().copied().collect();
            self.reducer.reconstruct_on(&scores, &grid)
        }
    }
}

/// Draws posterior thetas from retained samples (cycling when more draws
/// than retained samples are requested).
pub fn posterior_draws(chain: &PosteriorChain, n: usize) -> Vec<CalibrationVector> {
    let retained = chain.retained();
    (0..n)
        .map(|i| {
            let s = retained[i % retained.len()];
            CalibrationVector::from_array([s[0], s[1], s[2], s[3]])
        })
        .collect()
}

/// Convenience wrapper: one full inverse-UQ run for a method preset.
pub struct MethodRun {
    pub method: Method,
    pub problem: IuqProblem,
    pub report: SurrogateTrainReport,
    pub chains: Vec<PosteriorChain>,
}

/// Settings for [`run_method`]; everything a preset run needs beyond the
/// ensemble itself.
#[derive(Debug, Clone)]
pub struct MethodRunSettings {
    pub reduction: ReductionSettings,
    pub split_seed: u64,
    pub surrogate_seed: u64,
    pub mcmc: McmcConfig,
    pub n_chains: usize,
    pub sigma_exp: f64,
    pub phase_inflation: f64,
}

impl MethodRunSettings {
    pub fn new(seed: u64) -> Self {
        MethodRunSettings {
            reduction: ReductionSettings::default(),
            split_seed: seed,
            surrogate_seed: seed.wrapping_add(17),
            mcmc: McmcConfig::new(seed.wrapping_add(41)),
            n_chains: 1,
            sigma_exp: DEFAULT_SIGMA_EXP,
            phase_inflation: DEFAULT_PHASE_INFLATION,
        }
    }
}

/// Runs reduction, surrogate training, and MCMC for one method preset
/// against one experiment.
pub fn run_method(
    method: Method,
    data: &EnsembleData,
    experiment: &ExperimentalCurve,
    settings: &MethodRunSettings,
) -> Result<MethodRun> {
    let (pca_method, kind, use_code) = method.triple();
    let (reducer, aligned) = fit_reducer(pca_method, data, &settings.reduction)?;
    let scores = training_scores(&reducer, aligned.as_ref(), data)?;
    let split = split_data(data.thetas.len(), (0.70, 0.15, 0.15), settings.split_seed)?;
    let (surrogate, report) =
        train_surrogate_suite(kind, &data.thetas, &scores, &split, settings.surrogate_seed)?;
    let problem = IuqProblem {
        reducer,
        surrogate,
        prior: PriorSpec::calibration_default(),
        sigma_exp: settings.sigma_exp,
        phase_inflation: settings.phase_inflation,
        use_code_uncertainty: use_code,
    };
    let chains = problem.run_chains(experiment, &settings.mcmc, settings.n_chains)?;
    Ok(MethodRun { method, problem, report, chains })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_map_to_documented_triples() {
        assert_eq!(
            Method::Method1.triple(),
            (PcaMethod::Conventional, SurrogateKind::Gp, true)
        );
        assert_eq!(
            Method::Method2.triple(),
            (PcaMethod::Conventional, SurrogateKind::Dnn, false)
        );
        assert_eq!(
            Method::Method3.triple(),
            (PcaMethod::Fpca, SurrogateKind::Dnn, false)
        );
        assert_eq!(
            Method::Method4.triple(),
            (PcaMethod::Fpca, SurrogateKind::Bnn, true)
        );
        assert!(Method::parse("method5").is_err());
        assert_eq!(Method::parse("method3").unwrap(), Method::Method3);
    }

    #[test]
    fn conventional_reducer_round_trip_scores() {
        let grid = TimeGrid::new(0.0, 500.0, 200).unwrap();
        let data = generate_ensemble(40, &[(0.5, 2.0); 4], 3, &grid).unwrap();
        let settings = ReductionSettings {
            conventional_k: Some(6),
            ..ReductionSettings::default()
        };
        let (reducer, aligned) =
            fit_reducer(PcaMethod::Conventional, &data, &settings).unwrap();
        assert!(aligned.is_none());
        assert_eq!(reducer.n_scores(), 6);
        let scores = training_scores(&reducer, None, &data).unwrap();
        assert_eq!(scores.len(), 40);
        assert_eq!(scores[0].len(), 6);
        let rec = reducer.reconstruct_on(&scores[0], &grid).unwrap();
        assert_eq!(rec.values.len(), grid.n_points);
    }

    #[test]
    fn sigma_exp_pc_conventional_is_isotropic() {
        let grid = TimeGrid::new(0.0, 500.0, 150).unwrap();
        let data = generate_ensemble(30, &[(0.5, 2.0); 4], 5, &grid).unwrap();
        let settings = ReductionSettings {
            conventional_k: Some(4),
            ..ReductionSettings::default()
        };
        let (reducer, _) = fit_reducer(PcaMethod::Conventional, &data, &settings).unwrap();
        let sigma = reducer.sigma_exp_pc(10.0, 0.1).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r == c { 100.0 } else { 0.0 };
                assert!((sigma[(r, c)] - expect).abs() < 1e-6);
            }
        }
    }
}

//! Pipeline stages: each one reads upstream manifests, does its work through
//! the core library, writes its artifacts plus its own manifest. Stage
//! outputs carry no timestamps, so reruns are byte-identical; timestamps live
//! only in manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use iuq_core::align::align_ensemble;
use iuq_core::bayes::{
    chain_diagnostics, parameter_correlations, posterior_summary, McmcConfig, PosteriorChain,
};
use iuq_core::fuq::{coverage, propagate, EvalPath, PredictiveBand, SampleSource};
use iuq_core::io;
use iuq_core::pca::{self, Truncation};
use iuq_core::pipeline::{
    train_surrogate_suite, training_scores, EnsembleData, IuqProblem, PcaMethod, ReducerModel,
    SurrogateKind,
};
use iuq_core::sim::{
    lhs_sample, simulate_pct, synth_experiment, CalibrationVector, TimeGrid, TransientCurve,
};
use iuq_core::stats;
use iuq_core::surrogate::{split_data, BnnModel, DnnModel, GpModel, StdShortcut, SurrogateModel};
use iuq_core::Error as CoreError;

use crate::config::PipelineConfig;
use crate::svg::{Band, Plot, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub version: u32,
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Seconds since the epoch; the only timestamp in any artifact.
    pub timestamp: u64,
}

fn write_manifest(
    dir: &Path,
    stage: &str,
    cfg: &PipelineConfig,
    inputs: &[&Path],
    outputs: &[String],
) -> Result<()> {
    let manifest = StageManifest {
        stage: stage.to_string(),
        version: 1,
        config_hash: cfg.hash(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.to_vec(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn require_manifest(dir: &Path, stage: &str) -> Result<StageManifest> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(anyhow!(CoreError::Dependency(format!(
            "stage '{stage}' has not produced {} yet",
            path.display()
        ))));
    }
    Ok(io::read_json(&path)?)
}

fn grid_of(cfg: &PipelineConfig) -> Result<TimeGrid> {
    Ok(TimeGrid::new(cfg.grid.t_start, cfg.grid.t_end, cfg.grid.n_points)?)
}

fn bounds_of(cfg: &PipelineConfig) -> [(f64, f64); 4] {
    [(cfg.prior.lo, cfg.prior.hi); 4]
}

pub fn dir_design(out: &Path) -> PathBuf {
    out.join("design")
}
pub fn dir_curves(out: &Path) -> PathBuf {
    out.join("curves")
}
pub fn dir_aligned(out: &Path) -> PathBuf {
    out.join("aligned")
}
pub fn dir_pca(out: &Path) -> PathBuf {
    out.join("pca")
}
pub fn dir_train(out: &Path) -> PathBuf {
    out.join("train")
}
pub fn dir_iuq(out: &Path) -> PathBuf {
    out.join("iuq")
}
pub fn dir_fuq(out: &Path) -> PathBuf {
    out.join("fuq")
}
pub fn dir_report(out: &Path) -> PathBuf {
    out.join("report")
}

/// `sample`: write the LHS design.
pub fn cmd_sample(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_design(out);
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    let design = lhs_sample(cfg.design.n, &bounds_of(cfg), cfg.design.seed)?;
    io::write_design_csv(&dir.join("design.csv"), &design)?;
    write_manifest(&dir, "sample", cfg, &[], &["design.csv".to_string()])?;
    println!("sample: wrote {} design points", design.len());
    Ok(())
}

/// `simulate`: one curve per design row plus the synthetic experiment.
pub fn cmd_simulate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let design_dir = dir_design(out);
    require_manifest(&design_dir, "sample")?;
    let design = io::read_design_csv(&design_dir.join("design.csv"))?;
    let grid = grid_of(cfg)?;
    let dir = dir_curves(out);
    fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for (i, theta) in design.iter().enumerate() {
        let curve = simulate_pct(theta, &grid)?;
        let name = format!("curve_{i:03}.csv");
        io::write_curve_csv(&dir.join(&name), &curve)?;
        outputs.push(name);
    }
    let theta_true = CalibrationVector::from_array(cfg.experiment.theta_true);
    let experiment = synth_experiment(
        &theta_true,
        &grid,
        cfg.experiment.noise_std,
        cfg.experiment.seed,
    )?;
    io::write_curve_csv(&dir.join("experiment.csv"), &experiment.curve)?;
    outputs.push("experiment.csv".to_string());
    write_manifest(&dir, "simulate", cfg, &[&design_dir.join("manifest.json")], &outputs)?;
    println!("simulate: wrote {} curves + experiment", design.len());
    Ok(())
}

fn load_ensemble(cfg: &PipelineConfig, out: &Path) -> Result<EnsembleData> {
    let design_dir = dir_design(out);
    let curves_dir = dir_curves(out);
    require_manifest(&curves_dir, "simulate")?;
    let thetas = io::read_design_csv(&design_dir.join("design.csv"))?;
    let grid = grid_of(cfg)?;
    let curves: Vec<TransientCurve> = (0..thetas.len())
        .map(|i| io::read_curve_csv(&curves_dir.join(format!("curve_{i:03}.csv"))))
        .collect::<iuq_core::Result<_>>()?;
    Ok(EnsembleData { grid, thetas, curves })
}

/// `align`: functional registration of the simulated ensemble. Skipped (with
/// a manifest note) for the conventional method.
pub fn cmd_align(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_aligned(out);
    fs::create_dir_all(&dir)?;
    if cfg.pca.method == PcaMethod::Conventional {
        io::write_json(&dir.join("skipped.json"), &serde_json::json!({"skipped": true}))?;
        write_manifest(
            &dir,
            "align",
            cfg,
            &[&dir_curves(out).join("manifest.json")],
            &["skipped.json".to_string()],
        )?;
        println!("align: skipped (conventional PCA)");
        return Ok(());
    }
    let data = load_ensemble(cfg, out)?;
    let aligned = align_ensemble(&data.curves)?;
    io::write_aligned_dir(&dir, &aligned)?;

    // Landmark-spread report: peak / steepest-descent time stds.
    let spread = |curves: &[TransientCurve]| -> (f64, f64) {
        let pt: Vec<f64> = curves.iter().map(|c| c.peak_time()).collect();
        let qt: Vec<f64> = curves.iter().map(|c| c.quench_time()).collect();
        (stats::std_dev(&pt), stats::std_dev(&qt))
    };
    let (peak_before, quench_before) = spread(&data.curves);
    let (peak_after, quench_after) = spread(&aligned.warped_curves);
    io::write_json(
        &dir.join("landmark_report.json"),
        &serde_json::json!({
            "peak_time_std_before": peak_before,
            "peak_time_std_after": peak_after,
            "quench_time_std_before": quench_before,
            "quench_time_std_after": quench_after,
        }),
    )?;
    write_manifest(
        &dir,
        "align",
        cfg,
        &[&dir_curves(out).join("manifest.json")],
        &["manifest written by write_aligned_dir".to_string(), "landmark_report.json".to_string()],
    )?;
    println!(
        "align: peak std {peak_before:.2} -> {peak_after:.2} s, quench std {quench_before:.2} -> {quench_after:.2} s"
    );
    Ok(())
}

/// `pca`: fit the configured reduction and persist the model(s).
pub fn cmd_pca(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_pca(out);
    fs::create_dir_all(&dir)?;
    let data = load_ensemble(cfg, out)?;
    match cfg.pca.method {
        PcaMethod::Conventional => {
            let matrix = pca::DataMatrix::from_curves(&data.curves)?;
            let trunc = match cfg.pca.conventional_k {
                Some(k) => Truncation::Components(k),
                None => Truncation::VarianceFraction(cfg.pca.variance_target),
            };
            let model = pca::fit_pca(&matrix, trunc)?;
            io::write_pca_model(&dir, "conventional", &model)?;
            io::write_json(
                &dir.join("variance_report.json"),
                &serde_json::json!({
                    "method": "conventional",
                    "p_star": model.p_star(),
                    "retained_variance": model.retained_variance(),
                    "fractions": model.explained_variance_fractions()[..model.p_star().min(10)],
                }),
            )?;
        }
        PcaMethod::Fpca => {
            require_manifest(&dir_aligned(out), "align")?;
            let aligned = io::read_aligned_dir(&dir_aligned(out))?;
            let model = pca::fpca_fit(&aligned, cfg.pca.amplitude_k, cfg.pca.phase_k)?;
            io::write_fpca_model(&dir, &model)?;
            io::write_json(
                &dir.join("variance_report.json"),
                &serde_json::json!({
                    "method": "fpca",
                    "amplitude_k": model.amplitude_k(),
                    "phase_k": model.phase_k(),
                    "amplitude_retained_variance": model.amplitude_pca.retained_variance(),
                    "phase_retained_variance": model.phase_pca.retained_variance(),
                }),
            )?;
        }
    }
    write_manifest(
        &dir,
        "pca",
        cfg,
        &[&dir_curves(out).join("manifest.json")],
        &["variance_report.json".to_string()],
    )?;
    println!("pca: fitted {:?} reduction", cfg.pca.method);
    Ok(())
}

fn load_reducer(cfg: &PipelineConfig, out: &Path) -> Result<ReducerModel> {
    let dir = dir_pca(out);
    require_manifest(&dir, "pca")?;
    Ok(match cfg.pca.method {
        PcaMethod::Conventional => {
            ReducerModel::Conventional(io::read_pca_model(&dir, "conventional")?)
        }
        PcaMethod::Fpca => ReducerModel::Fpca(io::read_fpca_model(&dir)?),
    })
}

/// Serialized surrogate bundle layout in `train/`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainManifest {
    kind: SurrogateKind,
    n_scores: usize,
}

/// `train`: extract training scores, split, train the configured surrogate
/// family, persist models and quality report.
pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_train(out);
    fs::create_dir_all(&dir)?;
    let data = load_ensemble(cfg, out)?;
    let reducer = load_reducer(cfg, out)?;
    let aligned = match cfg.pca.method {
        PcaMethod::Fpca => Some(io::read_aligned_dir(&dir_aligned(out))?),
        PcaMethod::Conventional => None,
    };
    let scores = training_scores(&reducer, aligned.as_ref(), &data)?;
    let split = split_data(data.thetas.len(), (0.70, 0.15, 0.15), cfg.surrogate.split_seed)?;
    let (model, report) = train_surrogate_suite(
        cfg.surrogate.kind,
        &data.thetas,
        &scores,
        &split,
        cfg.surrogate.seed,
    )?;

    let mut outputs = Vec::new();
    match &model {
        SurrogateModel::Gp(gp) => {
            io::write_json(&dir.join("gp.json"), gp)?;
            outputs.push("gp.json".to_string());
        }
        SurrogateModel::PerScoreDnn(nets) => {
            for (j, net) in nets.iter().enumerate() {
                let name = format!("dnn_{j:02}.json");
                io::write_json(&dir.join(&name), net)?;
                outputs.push(name);
            }
        }
        SurrogateModel::PerScoreBnn { nets, shortcuts } => {
            for (j, net) in nets.iter().enumerate() {
                let name = format!("bnn_{j:02}.json");
                io::write_json(&dir.join(&name), net)?;
                outputs.push(name);
                let sname = format!("shortcut_{j:02}.json");
                io::write_json(&dir.join(&sname), &shortcuts[j])?;
                outputs.push(sname);
            }
        }
    }
    for (j, log) in report.logs.iter().enumerate() {
        if !log.is_empty() {
            let name = format!("training_log_{j:02}.csv");
            io::write_training_log_csv(&dir.join(&name), log)?;
            outputs.push(name);
        }
    }
    io::write_json(&dir.join("train_report.json"), &report)?;
    io::write_json(
        &dir.join("train_manifest.json"),
        &TrainManifest { kind: cfg.surrogate.kind, n_scores: reducer.n_scores() },
    )?;
    outputs.push("train_report.json".to_string());
    write_manifest(&dir, "train", cfg, &[&dir_pca(out).join("manifest.json")], &outputs)?;
    println!(
        "train: {:?} surrogates, test R2 {:?}",
        cfg.surrogate.kind,
        report
            .test_r2
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}

fn load_surrogate(out: &Path) -> Result<SurrogateModel> {
    let dir = dir_train(out);
    require_manifest(&dir, "train")?;
    let tm: TrainManifest = io::read_json(&dir.join("train_manifest.json"))?;
    Ok(match tm.kind {
        SurrogateKind::Gp => {
            let gp: GpModel = io::read_json(&dir.join("gp.json"))?;
            SurrogateModel::Gp(gp)
        }
        SurrogateKind::Dnn => {
            let nets: Vec<DnnModel> = (0..tm.n_scores)
                .map(|j| io::read_json(&dir.join(format!("dnn_{j:02}.json"))))
                .collect::<iuq_core::Result<_>>()?;
            SurrogateModel::PerScoreDnn(nets)
        }
        SurrogateKind::Bnn => {
            let nets: Vec<BnnModel> = (0..tm.n_scores)
                .map(|j| io::read_json(&dir.join(format!("bnn_{j:02}.json"))))
                .collect::<iuq_core::Result<_>>()?;
            let shortcuts: Vec<StdShortcut> = (0..tm.n_scores)
                .map(|j| io::read_json(&dir.join(format!("shortcut_{j:02}.json"))))
                .collect::<iuq_core::Result<_>>()?;
            SurrogateModel::PerScoreBnn { nets, shortcuts }
        }
    })
}

fn load_problem(cfg: &PipelineConfig, out: &Path) -> Result<IuqProblem> {
    let reducer = load_reducer(cfg, out)?;
    let surrogate = load_surrogate(out)?;
    Ok(IuqProblem {
        reducer,
        surrogate,
        prior: iuq_core::bayes::PriorSpec::uniform_box(cfg.prior.lo, cfg.prior.hi, 4)?,
        sigma_exp: cfg.likelihood.sigma_exp,
        phase_inflation: cfg.likelihood.phase_inflation,
        use_code_uncertainty: cfg.likelihood.use_code_uncertainty,
    })
}

fn load_experiment(cfg: &PipelineConfig, out: &Path) -> Result<iuq_core::ExperimentalCurve> {
    let curves_dir = dir_curves(out);
    require_manifest(&curves_dir, "simulate")?;
    let curve = io::read_curve_csv(&curves_dir.join("experiment.csv"))?;
    Ok(iuq_core::ExperimentalCurve {
        curve,
        noise_std: cfg.experiment.noise_std,
        position_label: "z=synthetic".to_string(),
    })
}

/// `iuq`: run the adaptive Metropolis chains and summarize the posterior.
pub fn cmd_iuq(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_iuq(out);
    fs::create_dir_all(&dir)?;
    let problem = load_problem(cfg, out)?;
    let experiment = load_experiment(cfg, out)?;
    let mcmc = McmcConfig {
        n_samples: cfg.mcmc.n_samples,
        burn_in: cfg.mcmc.burn_in,
        thin: cfg.mcmc.thin,
        ..McmcConfig::new(cfg.mcmc.seed)
    };
    let chains = problem.run_chains(&experiment, &mcmc, cfg.mcmc.chains)?;

    let mut outputs = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        let name = format!("chain_{c}.csv");
        io::write_chain_csv(&dir.join(&name), chain)?;
        outputs.push(name);
    }
    let summary = posterior_summary(&chains[0])?;
    let method_tag = format!(
        "{:?}+{:?}+code={}",
        cfg.pca.method, cfg.surrogate.kind, cfg.likelihood.use_code_uncertainty
    );
    let doc = io::summary_document(&method_tag, &summary);
    io::write_json(&dir.join("summary.json"), &doc)?;
    let refs: Vec<&PosteriorChain> = chains.iter().collect();
    let diag = chain_diagnostics(&refs)?;
    io::write_json(&dir.join("diagnostics.json"), &diag)?;
    let (corr, degenerate) = parameter_correlations(&chains[0])?;
    let corr_rows: Vec<Vec<f64>> = (0..corr.nrows())
        .map(|r| (0..corr.ncols()).map(|c| corr[(r, c)]).collect())
        .collect();
    io::write_json(
        &dir.join("correlations.json"),
        &serde_json::json!({"matrix": corr_rows, "degenerate": degenerate}),
    )?;
    outputs.extend([
        "summary.json".to_string(),
        "diagnostics.json".to_string(),
        "correlations.json".to_string(),
    ]);
    write_manifest(&dir, "iuq", cfg, &[&dir_train(out).join("manifest.json")], &outputs)?;
    println!(
        "iuq: acceptance {:.2}, split R-hat {:?}",
        diag.acceptance,
        diag.split_rhat
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}

fn read_chain_csv(path: &Path, burn_in: usize, thin: usize) -> Result<PosteriorChain> {
    let mut rd = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read chain {}", path.display()))?;
    let mut samples = Vec::new();
    let mut log_posts = Vec::new();
    let mut accepted = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let d = rec.len() - 3;
        let mut row = Vec::with_capacity(d);
        for j in 1..1 + d {
            row.push(rec[j].parse::<f64>()?);
        }
        samples.push(row);
        log_posts.push(rec[1 + d].parse::<f64>()?);
        accepted.push(&rec[2 + d] == "1");
    }
    let n_acc = accepted.iter().skip(burn_in).filter(|a| **a).count();
    let post = (samples.len() - burn_in).max(1);
    Ok(PosteriorChain {
        samples,
        log_posts,
        acceptance_rate: n_acc as f64 / post as f64,
        accepted,
        burn_in,
        thin,
        seed: 0,
    })
}

/// `fuq`: posterior predictive band via the surrogate path, prior band via
/// the full model, and coverage numbers.
pub fn cmd_fuq(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_fuq(out);
    fs::create_dir_all(&dir)?;
    let iuq_dir = dir_iuq(out);
    require_manifest(&iuq_dir, "iuq")?;
    let problem = load_problem(cfg, out)?;
    let experiment = load_experiment(cfg, out)?;
    let grid = grid_of(cfg)?;
    let chain = read_chain_csv(&iuq_dir.join("chain_0.csv"), cfg.mcmc.burn_in, cfg.mcmc.thin)?;

    let draws = iuq_core::pipeline::posterior_draws(&chain, cfg.fuq.n_posterior_draws);
    let eval = problem.surrogate_curve_eval(grid);
    let posterior_band = propagate(
        &draws,
        &eval,
        &grid,
        (0.025, 0.975),
        SampleSource::Posterior,
        EvalPath::Surrogate,
    )?;
    io::write_band_csv(&dir.join("posterior_band.csv"), &posterior_band)?;

    let prior_thetas = lhs_sample(
        cfg.fuq.n_prior_draws,
        &bounds_of(cfg),
        cfg.design.seed.wrapping_add(99),
    )?;
    let full = |t: &CalibrationVector| simulate_pct(t, &grid);
    let prior_band = propagate(
        &prior_thetas,
        &full,
        &grid,
        (0.025, 0.975),
        SampleSource::Prior,
        EvalPath::FullModel,
    )?;
    io::write_band_csv(&dir.join("prior_band.csv"), &prior_band)?;

    let cov = coverage(&posterior_band, &experiment)?;
    io::write_json(
        &dir.join("coverage.json"),
        &serde_json::json!({
            "posterior_coverage_of_experiment": cov,
            "posterior_mean_width": posterior_band.mean_width(),
            "prior_mean_width": prior_band.mean_width(),
            "propagation_failures": posterior_band.n_failures,
        }),
    )?;
    write_manifest(
        &dir,
        "fuq",
        cfg,
        &[&iuq_dir.join("manifest.json")],
        &[
            "posterior_band.csv".to_string(),
            "prior_band.csv".to_string(),
            "coverage.json".to_string(),
        ],
    )?;
    println!(
        "fuq: coverage {cov:.3}, posterior width {:.1} K vs prior {:.1} K",
        posterior_band.mean_width(),
        prior_band.mean_width()
    );
    Ok(())
}

fn band_from_csv(path: &Path, grid: TimeGrid) -> Result<PredictiveBand> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut mean = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        mean.push(rec[1].parse::<f64>()?);
        lower.push(rec[2].parse::<f64>()?);
        upper.push(rec[3].parse::<f64>()?);
    }
    Ok(PredictiveBand {
        grid,
        mean,
        lower,
        upper,
        source: SampleSource::Posterior,
        path: EvalPath::Surrogate,
        levels: (0.025, 0.975),
        n_samples: 0,
        n_failures: 0,
    })
}

/// `report`: one JSON + SVG bundle summarizing the run.
pub fn cmd_report(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let dir = dir_report(out);
    fs::create_dir_all(&dir)?;
    let iuq_dir = dir_iuq(out);
    let fuq_dir = dir_fuq(out);
    require_manifest(&iuq_dir, "iuq")?;
    require_manifest(&fuq_dir, "fuq")?;
    let grid = grid_of(cfg)?;

    let summary: serde_json::Value = io::read_json(&iuq_dir.join("summary.json"))?;
    let diagnostics: serde_json::Value = io::read_json(&iuq_dir.join("diagnostics.json"))?;
    let variance: serde_json::Value = io::read_json(&dir_pca(out).join("variance_report.json"))?;
    let train_report: serde_json::Value = io::read_json(&dir_train(out).join("train_report.json"))?;
    let coverage_info: serde_json::Value = io::read_json(&fuq_dir.join("coverage.json"))?;

    let report = serde_json::json!({
        "config_hash": cfg.hash(),
        "variance_explained": variance,
        "surrogate": train_report,
        "posterior_summary": summary,
        "diagnostics": diagnostics,
        "fuq": coverage_info,
    });
    io::write_json(&dir.join("report.json"), &report)?;

    // Trace plots per parameter.
    let chain = read_chain_csv(&iuq_dir.join("chain_0.csv"), cfg.mcmc.burn_in, cfg.mcmc.thin)?;
    let names = ["p1009", "p1010", "p1011", "p1031"];
    let mut outputs = vec!["report.json".to_string()];
    for (j, name) in names.iter().enumerate() {
        let stride = (chain.samples.len() / 2000).max(1);
        let pts: Vec<(f64, f64)> = chain
            .samples
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(i, s)| (i as f64, s[j]))
            .collect();
        let plot = Plot {
            title: &format!("MCMC trace: {name}"),
            x_label: "step",
            y_label: name,
            series: vec![Series { label: name, color: "#1f77b4", points: pts }],
            band: None,
        };
        let fname = format!("trace_{name}.svg");
        fs::write(dir.join(&fname), plot.render())?;
        outputs.push(fname);
    }

    // Band + experiment overlay.
    let posterior_band = band_from_csv(&fuq_dir.join("posterior_band.csv"), grid)?;
    let experiment = load_experiment(cfg, out)?;
    let times = grid.times();
    let plot = Plot {
        title: "Posterior predictive band vs experiment",
        x_label: "time (s)",
        y_label: "temperature (K)",
        series: vec![
            Series {
                label: "band mean",
                color: "#1f77b4",
                points: times.iter().copied().zip(posterior_band.mean.iter().copied()).collect(),
            },
            Series {
                label: "experiment",
                color: "#d62728",
                points: times
                    .iter()
                    .copied()
                    .zip(experiment.curve.values.iter().copied())
                    .collect(),
            },
        ],
        band: Some(Band {
            lower: times.iter().copied().zip(posterior_band.lower.iter().copied()).collect(),
            upper: times.iter().copied().zip(posterior_band.upper.iter().copied()).collect(),
            fill: "rgba(31,119,180,0.25)".to_string(),
        }),
    };
    fs::write(dir.join("band.svg"), plot.render())?;
    outputs.push("band.svg".to_string());

    write_manifest(
        &dir,
        "report",
        cfg,
        &[&iuq_dir.join("manifest.json"), &fuq_dir.join("manifest.json")],
        &outputs,
    )?;
    println!("report: wrote report.json and {} SVG plots", outputs.len() - 1);
    Ok(())
}

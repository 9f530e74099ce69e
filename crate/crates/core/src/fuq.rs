//! Forward propagation of parameter samples into pointwise predictive bands,
//! plus coverage and reconstruction-quality metrics against experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::{self, FpcaModel, PcaModel};
use crate::sim::{CalibrationVector, ExperimentalCurve, TimeGrid, TransientCurve};
use crate::stats;

/// Where the propagated samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Prior,
    Posterior,
}

/// How each sample was turned into a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    Surrogate,
    FullModel,
}

/// Pointwise mean and empirical quantile envelope of propagated curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictiveBand {
    pub grid: TimeGrid,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub source: SampleSource,
    pub path: EvalPath,
    /// Quantile levels of (lower, upper).
    pub levels: (f64, f64),
    pub n_samples: usize,
    /// Samples whose reconstruction failed and were skipped.
    pub n_failures: usize,
}

/// Fraction of failed samples tolerated before propagation errors out.
const MAX_FAILURE_FRACTION: f64 = 0.05;

/// Propagates samples through `eval` and assembles the pointwise band.
/// Reconstruction failures are skipped and counted; more than 5% of them is
/// an error.
pub fn propagate(
    samples: &[CalibrationVector],
    eval: &dyn Fn(&CalibrationVector) -> Result<TransientCurve>,
    grid: &TimeGrid,
    levels: (f64, f64),
    source: SampleSource,
    path: EvalPath,
) -> Result<PredictiveBand> {
    if samples.len() < 50 {
        return Err(Error::argument("propagate needs at least 50 samples"));
    }
    if !(0.0..1.0).contains(&levels.0) || !(0.0..=1.0).contains(&levels.1) || levels.0 >= levels.1 {
        return Err(Error::argument("quantile levels must satisfy 0 <= lo < hi <= 1"));
    }
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    let mut n_failures = 0usize;
    for theta in samples {
        match eval(theta) {
            Ok(c) => {
                if c.grid != *grid {
                    return Err(Error::argument("evaluated curve grid mismatch"));
                }
                curves.push(c.values);
            }
            Err(_) => n_failures += 1,
        }
    }
    if (n_failures as f64) > MAX_FAILURE_FRACTION * samples.len() as f64 {
        return Err(Error::numeric(format!(
            "{n_failures} of {} propagation samples failed",
            samples.len()
        )));
    }
    let n = curves.len();
    let p = grid.n_points;
    let mut mean = vec![0.0; p];
    let mut lower = vec![0.0; p];
    let mut upper = vec![0.0; p];
    let mut column = vec![0.0; n];
    for j in 0..p {
        for (i, c) in curves.iter().enumerate() {
            column[i] = c[j];
        }
        // Identical values must give an exactly degenerate band.
        mean[j] = if column.windows(2).all(|w| w[0] == w[1]) {
            column[0]
        } else {
            stats::mean(&column)
        };
        column.sort_by(f64::total_cmp);
        lower[j] = stats::quantile(&column, levels.0);
        upper[j] = stats::quantile(&column, levels.1);
    }
    Ok(PredictiveBand {
        grid: *grid,
        mean,
        lower,
        upper,
        source,
        path,
        levels,
        n_samples: samples.len(),
        n_failures,
    })
}

impl PredictiveBand {
    /// Mean vertical width, averaged over the grid.
    pub fn mean_width(&self) -> f64 {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u - l)
            .sum::<f64>()
            / self.upper.len() as f64
    }

    /// True when `other` lies inside this band pointwise.
    pub fn contains_band(&self, other: &PredictiveBand) -> bool {
        self.lower
            .iter()
            .zip(&other.lower)
            .all(|(outer, inner)| outer <= inner)
            && self
                .upper
                .iter()
                .zip(&other.upper)
                .all(|(outer, inner)| outer >= inner)
    }
}

/// Fraction of grid points where the experimental value lies inside the band.
pub fn coverage(band: &PredictiveBand, experiment: &ExperimentalCurve) -> Result<f64> {
    if band.grid != experiment.curve.grid {
        return Err(Error::argument("band and experiment grids differ"));
    }
    let n = band.grid.n_points;
    let hits = experiment
        .curve
        .values
        .iter()
        .zip(band.lower.iter().zip(&band.upper))
        .filter(|(v, (lo, hi))| **lo <= **v && **v <= **hi)
        .count();
    Ok(hits as f64 / n as f64)
}

/// Reconstruction error statistics for one sample and one method.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReconErrors {
    pub max_abs: f64,
    pub rms: f64,
    pub quench_max_abs: f64,
    pub quench_rms: f64,
}

/// Per-sample comparison row: conventional PCA vs functional PCA at equal
/// PC budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconReport {
    pub sample: usize,
    pub conventional: ReconErrors,
    pub fpca: ReconErrors,
}

fn recon_errors(orig: &TransientCurve, rec: &[f64], quench_time: f64, half_window: f64) -> ReconErrors {
    let grid = &orig.grid;
    let mut max_abs = 0.0_f64;
    let mut ss = 0.0;
    let mut q_max = 0.0_f64;
    let mut q_ss = 0.0;
    let mut q_n = 0usize;
    for (i, (a, b)) in orig.values.iter().zip(rec).enumerate() {
        let e = (a - b).abs();
        max_abs = max_abs.max(e);
        ss += e * e;
        if (grid.time(i) - quench_time).abs() <= half_window {
            q_max = q_max.max(e);
            q_ss += e * e;
            q_n += 1;
        }
    }
    ReconErrors {
        max_abs,
        rms: (ss / orig.values.len() as f64).sqrt(),
        quench_max_abs: q_max,
        quench_rms: if q_n > 0 { (q_ss / q_n as f64).sqrt() } else { 0.0 },
    }
}

/// Half-width of the quench window used in the comparison (seconds).
pub const QUENCH_WINDOW_S: f64 = 10.0;

/// Reconstructs every curve through both reducers at an equal PC budget and
/// reports overall and quench-window errors.
pub fn reconstruction_comparison(
    curves: &[TransientCurve],
    conventional: &PcaModel,
    fpca: &FpcaModel,
    pc_budget: usize,
) -> Result<Vec<ReconReport>> {
    if conventional.p_star() != pc_budget || fpca.total_k() != pc_budget {
        return Err(Error::argument(format!(
            "PC budgets differ: conventional {} vs fpca {} vs requested {pc_budget}",
            conventional.p_star(),
            fpca.total_k()
        )));
    }
    let mut out = Vec::with_capacity(curves.len());
    for (i, curve) in curves.iter().enumerate() {
        let tq = curve.quench_time();

        let conv_scores = pca::project(conventional, &curve.values)?;
        let conv_rec = pca::reconstruct(conventional, &conv_scores)?;

        let (amp, phase) = pca::fpca_project(fpca, curve)?;
        let fpca_rec = pca::fpca_reconstruct(fpca, &amp, &phase)?;

        out.push(ReconReport {
            sample: i,
            conventional: recon_errors(curve, &conv_rec, tq, QUENCH_WINDOW_S),
            fpca: recon_errors(curve, &fpca_rec.values, tq, QUENCH_WINDOW_S),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align;
    use crate::pca::{fit_pca, fpca_fit, DataMatrix, Truncation};
    use crate::sim::{lhs_sample, simulate_pct};

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 500.0, 400).unwrap()
    }

    fn full_model(g: TimeGrid) -> impl Fn(&CalibrationVector) -> Result<TransientCurve> {
        move |theta| simulate_pct(theta, &g)
    }

    #[test]
    fn identical_samples_zero_width_band() {
        let g = grid();
        let theta = CalibrationVector::nominal();
        let samples = vec![theta; 60];
        let band = propagate(
            &samples,
            &full_model(g),
            &g,
            (0.025, 0.975),
            SampleSource::Prior,
            EvalPath::FullModel,
        )
        .unwrap();
        let truth = simulate_pct(&theta, &g).unwrap();
        assert_eq!(band.mean, truth.values);
        assert_eq!(band.lower, truth.values);
        assert_eq!(band.upper, truth.values);
        assert_eq!(band.n_failures, 0);
    }

    #[test]
    fn needs_fifty_samples() {
        let g = grid();
        let samples = vec![CalibrationVector::nominal(); 10];
        assert!(matches!(
            propagate(
                &samples,
                &full_model(g),
                &g,
                (0.025, 0.975),
                SampleSource::Prior,
                EvalPath::FullModel
            ),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn narrower_level_band_nests_inside_wider() {
        let g = grid();
        let samples = lhs_sample(80, &[(0.5, 2.0); 4], 3).unwrap();
        let wide = propagate(
            &samples,
            &full_model(g),
            &g,
            (0.025, 0.975),
            SampleSource::Prior,
            EvalPath::FullModel,
        )
        .unwrap();
        let narrow = propagate(
            &samples,
            &full_model(g),
            &g,
            (0.25, 0.75),
            SampleSource::Prior,
            EvalPath::FullModel,
        )
        .unwrap();
        assert!(wide.contains_band(&narrow));
        assert!(narrow.mean_width() <= wide.mean_width());
    }

    #[test]
    fn failures_are_counted_and_bounded() {
        let g = grid();
        let samples = lhs_sample(100, &[(0.5, 2.0); 4], 9).unwrap();
        let mut calls = std::cell::Cell::new(0usize);
        let flaky = |theta: &CalibrationVector| -> Result<TransientCurve> {
            let k = calls.get();
            calls.set(k + 1);
            if k % 25 == 0 {
                Err(Error::numeric("synthetic failure"))
            } else {
                simulate_pct(theta, &g)
            }
        };
        let band = propagate(
            &samples,
            &flaky,
            &g,
            (0.025, 0.975),
            SampleSource::Posterior,
            EvalPath::Surrogate,
        )
        .unwrap();
        assert_eq!(band.n_failures, 4);

        calls = std::cell::Cell::new(0);
        let very_flaky = |theta: &CalibrationVector| -> Result<TransientCurve> {
            let k = calls.get();
            calls.set(k + 1);
            if k % 3 == 0 {
                Err(Error::numeric("synthetic failure"))
            } else {
                simulate_pct(theta, &g)
            }
        };
        assert!(matches!(
            propagate(
                &samples,
                &very_flaky,
                &g,
                (0.025, 0.975),
                SampleSource::Posterior,
                EvalPath::Surrogate
            ),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn coverage_trivial_cases() {
        let g = grid();
        let samples = lhs_sample(80, &[(0.8, 1.4); 4], 5).unwrap();
        let band = propagate(
            &samples,
            &full_model(g),
            &g,
            (0.025, 0.975),
            SampleSource::Prior,
            EvalPath::FullModel,
        )
        .unwrap();
        let mean_exp = ExperimentalCurve {
            curve: TransientCurve { grid: g, values: band.mean.clone() },
            noise_std: 0.0,
            position_label: "mean".to_string(),
        };
        assert_eq!(coverage(&band, &mean_exp).unwrap(), 1.0);

        let above = ExperimentalCurve {
            curve: TransientCurve {
                grid: g,
                values: band.upper.iter().map(|v| v + 50.0).collect(),
            },
            noise_std: 0.0,
            position_label: "above".to_string(),
        };
        assert_eq!(coverage(&band, &above).unwrap(), 0.0);
    }

    #[test]
    fn coverage_grid_mismatch_rejected() {
        let g = grid();
        let samples = vec![CalibrationVector::nominal(); 50];
        let band = propagate(
            &samples,
            &full_model(g),
            &g,
            (0.025, 0.975),
            SampleSource::Prior,
            EvalPath::FullModel,
        )
        .unwrap();
        let other = TimeGrid::new(0.0, 400.0, 400).unwrap();
        let exp = ExperimentalCurve {
            curve: simulate_pct(&CalibrationVector::nominal(), &other).unwrap(),
            noise_std: 0.0,
            position_label: String::new(),
        };
        assert!(matches!(coverage(&band, &exp), Err(Error::Argument(_))));
    }

    #[test]
    fn reconstruction_comparison_report_shape_and_full_rank() {
        let g = TimeGrid::new(0.0, 500.0, 250).unwrap();
        let thetas = lhs_sample(30, &[(0.6, 1.8); 4], 11).unwrap();
        let curves: Vec<TransientCurve> = thetas
            .iter()
            .map(|t| simulate_pct(t, &g).unwrap())
            .collect();
        let aligned = align::align_ensemble(&curves).unwrap();

        // full-rank-ish budget on the training curves themselves
        let k = 8;
        let conv = fit_pca(
            &DataMatrix::from_curves(&curves).unwrap(),
            Truncation::Components(k),
        )
        .unwrap();
        let fpca = fpca_fit(&aligned, 4, 4).unwrap();
        let reports = reconstruction_comparison(&curves, &conv, &fpca, k).unwrap();
        assert_eq!(reports.len(), curves.len());

        // budget mismatch is rejected
        assert!(matches!(
            reconstruction_comparison(&curves, &conv, &fpca, k + 1),
            Err(Error::Argument(_))
        ));
    }
}

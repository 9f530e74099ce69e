//! Synthetic transient simulator standing in for the system thermal-hydraulic
//! code, plus design generation and synthetic experiments.
//!
//! The simulator maps four dimensionless calibration multipliers to a peak
//! cladding temperature (PCT) style transient: an exponential-saturation rise
//! to a single interior peak, a linear cooling segment whose slope is tied to
//! `p1009`, and a steep logistic quench drop onto a saturation plateau. The
//! feature maps below make every multiplier identifiable:
//!
//! * peak temperature rises with `p1011`, falls with `p1009`,
//! * peak time scales with `p1031`,
//! * quench time rises with `p1010` and `p1031`,
//! * post-peak cooling slope rises with `p1009`.
//!
//! This is artifact plumbing with no physics-fidelity claim.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior support of every calibration multiplier.
pub const PRIOR_LO: f64 = 0.0;
pub const PRIOR_HI: f64 = 5.0;

/// Base temperature at the start of the transient (K).
pub const T_INIT: f64 = 450.0;
/// Saturation plateau the quench settles onto (K).
pub const T_SAT: f64 = 400.0;
/// Nominal peak temperature at theta = (1,1,1,1) (K).
pub const T_PEAK0: f64 = 1100.0;
/// Nominal time of the peak (s).
pub const T_MAX0: f64 = 60.0;
/// Nominal quench time (s).
pub const T_QUENCH0: f64 = 250.0;
/// Width of the logistic quench drop (s).
pub const QUENCH_WIDTH: f64 = 3.0;
/// Base post-peak cooling slope (K/s); scaled by `p1009`.
pub const COOL_SLOPE0: f64 = 0.12;
/// Rate constant of the exponential-saturation rise.
pub const RISE_RATE: f64 = 3.0;

/// Four multiplicative calibration factors, each supported on `[0, 5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationVector {
    pub p1009: f64,
    pub p1010: f64,
    pub p1011: f64,
    pub p1031: f64,
}

impl CalibrationVector {
    pub const DIM: usize = 4;
    pub const NAMES: [&'static str; 4] = ["P1009", "P1010", "P1011", "P1031"];

    /// Validates finiteness and prior support.
    pub fn new(p1009: f64, p1010: f64, p1011: f64, p1031: f64) -> Result<Self> {
        let v = CalibrationVector { p1009, p1010, p1011, p1031 };
        v.validate()?;
        Ok(v)
    }

    pub fn nominal() -> Self {
        CalibrationVector { p1009: 1.0, p1010: 1.0, p1011: 1.0, p1031: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in Self::NAMES.iter().zip(self.as_array()) {
            if !x.is_finite() {
                return Err(Error::domain(format!("{name} is not finite")));
            }
            if !(PRIOR_LO..=PRIOR_HI).contains(&x) {
                return Err(Error::domain(format!(
                    "{name} = {x} outside prior support [{PRIOR_LO}, {PRIOR_HI}]"
                )));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p1009, self.p1010, self.p1011, self.p1031]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        CalibrationVector { p1009: a[0], p1010: a[1], p1011: a[2], p1031: a[3] }
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        if s.len() != 4 {
            return Err(Error::argument(format!(
                "calibration vector needs 4 components, got {}",
                s.len()
            )));
        }
        Ok(Self::from_array([s[0], s[1], s[2], s[3]]))
    }
}

/// Uniform time grid on `[t_start, t_end]` with `n_points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() || t_start >= t_end {
            return Err(Error::argument(format!(
                "degenerate grid: t_start = {t_start}, t_end = {t_end}"
            )));
        }
        if n_points < 2 {
            return Err(Error::argument("grid needs at least 2 points"));
        }
        Ok(TimeGrid { t_start, t_end, n_points })
    }

    /// The default grid used throughout: `[0, 500]` s sampled at 1000 points.
    pub fn default_grid() -> Self {
        TimeGrid { t_start: 0.0, t_end: 500.0, n_points: 1000 }
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_points - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + self.dt() * i as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.time(i)).collect()
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Index of the grid node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = ((t - self.t_start) / self.dt()).round() as isize;
        i.clamp(0, self.n_points as isize - 1) as usize
    }
}

/// A sampled time series on a uniform grid (temperature in kelvin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl TransientCurve {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::argument(format!(
                "curve has {} values for a {}-point grid",
                values.len(),
                grid.n_points
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::argument("curve values must be finite and positive"));
        }
        Ok(TransientCurve { grid, values })
    }

    /// Time of the global maximum.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty curve");
        self.grid.time(i)
    }

    pub fn peak_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Time of the steepest descent (most negative central-difference slope).
    pub fn quench_time(&self) -> f64 {
        let n = self.values.len();
        let mut best_i = 1;
        let mut best = f64::INFINITY;
        for i in 1..n - 1 {
            let s = self.values[i + 1] - self.values[i - 1];
            if s < best {
                best = s;
                best_i = i;
            }
        }
        self.grid.time(best_i)
    }

    /// Linear interpolation at time `t` (clamped to the grid range).
    pub fn value_at(&self, t: f64) -> f64 {
        interp_uniform(&self.grid, &self.values, t)
    }
}

/// Linear interpolation of uniformly sampled `values` at time `t`. Queries
/// within 1e-9 cells of a node return that node's value exactly, so identity
/// warps are no-ops bit-for-bit.
pub(crate) fn interp_uniform(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    let dt = grid.dt();
    let x = (t - grid.t_start) / dt;
    if x <= 0.0 {
        return values[0];
    }
    let last = values.len() - 1;
    if x >= last as f64 {
        return values[last];
    }
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 {
        return values[nearest as usize];
    }
    let i = x.floor() as usize;
    let w = x - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// A synthetic measured curve: truth plus i.i.d. Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalCurve {
    pub curve: TransientCurve,
    pub noise_std: f64,
    /// Design-variable metadata (e.g. an axial position label); not used by
    /// the inference itself.
    pub position_label: String,
}

/// Closed-form curve features implied by a calibration vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PctFeatures {
    /// Peak temperature (K).
    pub t_peak: f64,
    /// Time of the peak (s).
    pub t_max: f64,
    /// Center of the quench drop (s); clamped to `t_max + 10`.
    pub t_quench: f64,
    /// Post-peak linear cooling slope (K/s).
    pub cool_slope: f64,
    /// True when the `t_quench >= t_max + 10` clamp was active.
    pub quench_clamped: bool,
}

/// Feature maps from calibration factors to curve landmarks.
///
/// Each map is smooth and strictly monotone in its drivers, so inverse
/// calibration has a well-posed target. The quench clamp introduces a flat
/// region in parameter space; with the constants above it never activates on
/// the prior box, but it is kept as a guard.
pub fn features(theta: &CalibrationVector) -> PctFeatures {
    let t_peak = T_PEAK0 + 150.0 * (theta.p1011 - 1.0) - 50.0 * (theta.p1009 - 1.0);
    let t_max = T_MAX0 * (1.0 + 0.3 * (theta.p1031 - 1.0));
    let t_quench_raw =
        T_QUENCH0 * (1.0 + 0.4 * (theta.p1010 - 1.0) + 0.2 * (theta.p1031 - 1.0));
    let clamp = t_max + 10.0;
    let quench_clamped = t_quench_raw < clamp;
    let t_quench = t_quench_raw.max(clamp);
    let cool_slope = COOL_SLOPE0 * (1.0 + 0.5 * (theta.p1009 - 1.0));
    PctFeatures { t_peak, t_max, t_quench, cool_slope, quench_clamped }
}

/// Evaluates the synthetic PCT transient for `theta` on `grid`.
///
/// The peak lands exactly on the grid node nearest the feature-map peak time,
/// so `max(values)` equals the peak-temperature feature bit-for-bit. The
/// function is pure: identical inputs give identical outputs.
pub fn simulate_pct(theta: &CalibrationVector, grid: &TimeGrid) -> Result<TransientCurve> {
    theta.validate()?;
    TimeGrid::new(grid.t_start, grid.t_end, grid.n_points)?;

    let f = features(theta);
    // Snap the peak to the nearest node so the maximum is attained exactly.
    let t_m = grid.time(grid.nearest_index(f.t_max)).max(grid.time(1));
    let rise_norm = 1.0 - (-RISE_RATE).exp();

    let logistic = |t: f64| 1.0 / (1.0 + (-(t - f.t_quench) / QUENCH_WIDTH).exp());
    let l0 = logistic(t_m);

    let mut values = Vec::with_capacity(grid.n_points);
    for i in 0..grid.n_points {
        let t = grid.time(i);
        let dry = if t <= t_m {
            let u = ((t - grid.t_start) / (t_m - grid.t_start)).clamp(0.0, 1.0);
            T_INIT + (f.t_peak - T_INIT) * (1.0 - (-RISE_RATE * u).exp()) / rise_norm
        } else {
            T_SAT.max(f.t_peak - f.cool_slope * (t - t_m))
        };
        let v = T_SAT + (dry - T_SAT) * (1.0 - logistic(t)) / (1.0 - l0);
        values.push(v);
    }
    TransientCurve::new(*grid, values)
}

/// Latin-hypercube design: `n` points, one per equal-width stratum in each
/// dimension, seeded and reproducible bit-for-bit.
pub fn lhs_sample(
    n: usize,
    bounds: &[(f64, f64); 4],
    seed: u64,
) -> Result<Vec<CalibrationVector>> {
    if n == 0 {
        return Err(Error::argument("lhs_sample needs n >= 1"));
    }
    for (lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::argument(format!("degenerate bounds ({lo}, {hi})")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = [const { Vec::new() }; 4];
    for (d, col) in cols.iter_mut().enumerate() {
        let (lo, hi) = bounds[d];
        let width = (hi - lo) / n as f64;
        let mut strata: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the shared stream.
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        *col = strata
            .into_iter()
            .map(|s| lo + (s as f64 + rng.random::<f64>()) * width)
            .collect::<Vec<f64>>();
    }
    Ok((0..n)
        .map(|i| CalibrationVector {
            p1009: cols[0][i],
            p1010: cols[1][i],
            p1011: cols[2][i],
            p1031: cols[3][i],
        })
        .collect())
}

/// Simulated experiment: truth at `theta_true` plus i.i.d. Gaussian noise.
pub fn synth_experiment(
    theta_true: &CalibrationVector,
    grid: &TimeGrid,
    noise_std: f64,
    seed: u64,
) -> Result<ExperimentalCurve> {
    if !noise_std.is_finite() || noise_std < 0.0 {
        return Err(Error::argument(format!("noise_std = {noise_std} must be >= 0")));
    }
    let truth = simulate_pct(theta_true, grid)?;
    let values = if noise_std == 0.0 {
        truth.values.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std).expect("validated std");
        truth
            .values
            .iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect()
    };
    Ok(ExperimentalCurve {
        curve: TransientCurve { grid: *grid, values },
        noise_std,
        position_label: "z=synthetic".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_500() -> TimeGrid {
        TimeGrid::default_grid()
    }

    #[test]
    fn nominal_peak_is_exact() {
        let c = simulate_pct(&CalibrationVector::nominal(), &grid_500()).unwrap();
        assert_eq!(c.peak_value(), T_PEAK0);
    }

    #[test]
    fn quench_time_moves_with_p1010() {
        let g = grid_500();
        let a = simulate_pct(&CalibrationVector::nominal(), &g).unwrap();
        let b = simulate_pct(&CalibrationVector::new(1.0, 1.5, 1.0, 1.0).unwrap(), &g).unwrap();
        assert!(b.quench_time() > a.quench_time());
    }

    #[test]
    fn theta_outside_support_is_domain_error() {
        let g = grid_500();
        let theta = CalibrationVector { p1009: 6.0, p1010: 1.0, p1011: 1.0, p1031: 1.0 };
        match simulate_pct(&theta, &g) {
            Err(Error::Domain(_)) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn simulate_is_pure() {
        let g = grid_500();
        let theta = CalibrationVector::new(1.2, 0.8, 1.4, 2.0).unwrap();
        let a = simulate_pct(&theta, &g).unwrap();
        let b = simulate_pct(&theta, &g).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn feature_maps_monotone_by_finite_difference() {
        let h = 1e-6;
        let base = CalibrationVector::new(1.3, 1.1, 0.9, 1.2).unwrap();
        let up = |f: fn(&CalibrationVector) -> f64, bump: [f64; 4]| {
            let a = base.as_array();
            let b = CalibrationVector::from_array([
                a[0] + bump[0] * h,
                a[1] + bump[1] * h,
                a[2] + bump[2] * h,
                a[3] + bump[3] * h,
            ]);
            (f(&b) - f(&base)) / h
        };
        assert!(up(|t| features(t).t_quench, [0.0, 1.0, 0.0, 0.0]) > 0.0);
        assert!(up(|t| features(t).t_peak, [0.0, 0.0, 1.0, 0.0]) > 0.0);
        assert!(up(|t| features(t).t_peak, [1.0, 0.0, 0.0, 0.0]) < 0.0);
        assert!(up(|t| features(t).t_max, [0.0, 0.0, 0.0, 1.0]) > 0.0);
    }

    #[test]
    fn unique_peak_and_plateau_settling() {
        // A grid long enough that every prior-box curve quenches in-window.
        let g = TimeGrid::new(0.0, 1000.0, 1000).unwrap();
        for theta in lhs_sample(40, &[(PRIOR_LO, PRIOR_HI); 4], 99).unwrap() {
            let c = simulate_pct(&theta, &g).unwrap();
            let peak = c.peak_value();
            let n_at_peak = c.values.iter().filter(|v| **v == peak).count();
            assert_eq!(n_at_peak, 1, "peak must be unique");
            let f = features(&theta);
            if f.t_quench + 25.0 <= g.t_end {
                assert!(
                    (c.values.last().unwrap() - T_SAT).abs() <= 1.0,
                    "curve must settle to within 1 K of the plateau"
                );
            }
        }
    }

    #[test]
    fn lhs_stratification_and_determinism() {
        let bounds = [(PRIOR_LO, PRIOR_HI); 4];
        let a = lhs_sample(4, &bounds, 12).unwrap();
        let b = lhs_sample(4, &bounds, 12).unwrap();
        assert_eq!(a, b);
        for d in 0..4 {
            let mut hit = [false; 4];
            for v in &a {
                let x = v.as_array()[d];
                let s = ((x - PRIOR_LO) / 1.25).floor() as usize;
                assert!(s < 4, "sample out of bounds");
                assert!(!hit[s], "two samples in one stratum");
                hit[s] = true;
            }
            assert!(hit.iter().all(|h| *h));
        }
    }

    #[test]
    fn lhs_mean_near_center() {
        let samples = lhs_sample(500, &[(PRIOR_LO, PRIOR_HI); 4], 3).unwrap();
        for d in 0..4 {
            let mean: f64 =
                samples.iter().map(|v| v.as_array()[d]).sum::<f64>() / samples.len() as f64;
            assert!((mean - 2.5).abs() < 0.1, "dim {d} mean {mean}");
        }
    }

    #[test]
    fn lhs_rejects_empty_and_degenerate() {
        assert!(matches!(
            lhs_sample(0, &[(0.0, 5.0); 4], 1),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            lhs_sample(3, &[(1.0, 1.0), (0.0, 5.0), (0.0, 5.0), (0.0, 5.0)], 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn experiment_zero_noise_equals_truth() {
        let g = grid_500();
        let theta = CalibrationVector::new(1.2, 1.1, 0.8, 1.0).unwrap();
        let e = synth_experiment(&theta, &g, 0.0, 5).unwrap();
        let truth = simulate_pct(&theta, &g).unwrap();
        assert_eq!(e.curve.values, truth.values);
    }

    #[test]
    fn experiment_noise_std_in_chi_square_band() {
        let g = grid_500();
        let theta = CalibrationVector::nominal();
        let e = synth_experiment(&theta, &g, 10.0, 17).unwrap();
        let truth = simulate_pct(&theta, &g).unwrap();
        let resid: Vec<f64> = e
            .curve
            .values
            .iter()
            .zip(&truth.values)
            .map(|(a, b)| a - b)
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var =
            resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        let std = var.sqrt();
        assert!((8.5..=11.5).contains(&std), "std = {std}");
    }

    #[test]
    fn experiment_seeds_differ_noise_only() {
        let g = grid_500();
        let theta = CalibrationVector::nominal();
        let a = synth_experiment(&theta, &g, 5.0, 1).unwrap();
        let b = synth_experiment(&theta, &g, 5.0, 2).unwrap();
        assert_ne!(a.curve.values, b.curve.values);
        assert_eq!(a.noise_std, b.noise_std);
    }

    #[test]
    fn negative_noise_rejected() {
        let g = grid_500();
        assert!(matches!(
            synth_experiment(&CalibrationVector::nominal(), &g, -1.0, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn interp_endpoints_and_midpoint() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let c = TransientCurve::new(g, vec![1.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(c.value_at(0.0), 1.0);
        assert_relative_eq!(c.value_at(0.25), 1.5);
        assert_relative_eq!(c.value_at(1.0), 4.0);
        assert_relative_eq!(c.value_at(2.0), 4.0);
    }
}

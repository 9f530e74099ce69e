//! Functional alignment via square-root slope functions (SRSF).
//!
//! A curve `f` is represented by `q(t) = sign(f'(t)) sqrt(|f'(t)|)`. Warping
//! `f` by a boundary-fixed monotone `gamma` acts on `q` as
//! `q_gamma = (q o gamma) sqrt(gamma')`, which preserves the L2 norm, so the
//! alignment cost `|| q1 - (q2 o gamma) sqrt(gamma') ||` is a proper distance
//! over warpings. [`optimal_warp`] minimizes the discretized cost by dynamic
//! programming over a slope-constrained lattice; [`align_ensemble`] iterates a
//! cheap Karcher-mean style template to register a whole ensemble.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{interp_uniform, TimeGrid, TransientCurve};
use crate::stats;

/// Square-root slope representation of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrsfCurve {
    pub grid: TimeGrid,
    pub q_values: Vec<f64>,
}

impl SrsfCurve {
    /// L2 norm via trapezoidal quadrature.
    pub fn norm(&self) -> f64 {
        let dt = self.grid.dt();
        let mut acc = 0.0;
        for w in self.q_values.windows(2) {
            acc += 0.5 * (w[0] * w[0] + w[1] * w[1]) * dt;
        }
        acc.sqrt()
    }
}

/// Boundary-fixed monotone reparameterization of the time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingFunction {
    pub grid: TimeGrid,
    pub gamma_values: Vec<f64>,
}

impl WarpingFunction {
    pub fn new(grid: TimeGrid, gamma_values: Vec<f64>) -> Result<Self> {
        if gamma_values.len() != grid.n_points {
            return Err(Error::argument("warping length does not match grid"));
        }
        let g = WarpingFunction { grid, gamma_values };
        g.validate()?;
        Ok(g)
    }

    pub fn identity(grid: TimeGrid) -> Self {
        WarpingFunction { gamma_values: grid.times(), grid }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.gamma_values;
        let (a, b) = (self.grid.t_start, self.grid.t_end);
        let tol = 1e-9 * self.grid.span();
        if (v[0] - a).abs() > tol || (v[v.len() - 1] - b).abs() > tol {
            return Err(Error::argument("warping must fix the boundary"));
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::argument("warping must be non-decreasing"));
        }
        if v.iter().any(|x| *x < a - tol || *x > b + tol) {
            return Err(Error::argument("warping values must stay inside the grid"));
        }
        Ok(())
    }

    /// Evaluates the inverse warp on the grid by monotone linear
    /// interpolation. Requires a strictly increasing warp (repair first).
    pub fn inverse_on_grid(&self) -> Vec<f64> {
        let times = self.grid.times();
        times
            .iter()
            .map(|t| stats::interp_linear(&self.gamma_values, &times, *t))
            .collect()
    }

    /// Max deviation from the identity warp, in seconds.
    pub fn max_identity_deviation(&self) -> f64 {
        self.gamma_values
            .iter()
            .enumerate()
            .map(|(i, g)| (g - self.grid.time(i)).abs())
            .fold(0.0, f64::max)
    }
}

/// Output of [`align_ensemble`]: landmark-registered curves, their warps, and
/// the template they were registered against.
#[derive(Debug, Clone)]
pub struct AlignedEnsemble {
    pub warped_curves: Vec<TransientCurve>,
    pub warpings: Vec<WarpingFunction>,
    pub template: SrsfCurve,
}

/// SRSF of a sampled curve. The derivative is estimated by central
/// differences in the interior and second-order one-sided stencils at the
/// endpoints, so no smoothing blunts sharp features.
pub fn srsf(f: &TransientCurve) -> Result<SrsfCurve> {
    let n = f.values.len();
    if n < 3 {
        return Err(Error::argument("srsf needs at least 3 grid points"));
    }
    let h = f.grid.dt();
    let v = &f.values;
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        };
        q.push(d.signum() * d.abs().sqrt());
    }
    Ok(SrsfCurve { grid: f.grid, q_values: q })
}

/// Reconstructs a curve from its SRSF by cumulative trapezoidal integration
/// of `q |q|`, anchored at `f(t_start) = f0`.
pub fn srsf_to_curve(q: &SrsfCurve, f0: f64) -> TransientCurve {
    let h = q.grid.dt();
    let integrand: Vec<f64> = q.q_values.iter().map(|x| x * x.abs()).collect();
    let mut values = Vec::with_capacity(integrand.len());
    let mut acc = f0;
    values.push(acc);
    for w in integrand.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * h;
        values.push(acc);
    }
    TransientCurve { grid: q.grid, values }
}

/// Composes a curve with a warp: output(t) = f(gamma(t)), values by linear
/// interpolation. Endpoints are preserved because warps fix the boundary.
pub fn warp_curve(f: &TransientCurve, gamma: &WarpingFunction) -> Result<TransientCurve> {
    if f.grid != gamma.grid {
        return Err(Error::argument("curve and warping must share the grid"));
    }
    let values = gamma
        .gamma_values
        .iter()
        .map(|g| interp_uniform(&f.grid, &f.values, *g))
        .collect();
    Ok(TransientCurve { grid: f.grid, values })
}

/// Warps an SRSF by the group action `(q o gamma) sqrt(gamma')`, with
/// `gamma'` from central differences of the sampled warp.
pub fn warp_srsf(q: &SrsfCurve, gamma: &WarpingFunction) -> Result<SrsfCurve> {
    if q.grid != gamma.grid {
        return Err(Error::argument("srsf and warping must share the grid"));
    }
    let n = q.q_values.len();
    let h = q.grid.dt();
    let g = &gamma.gamma_values;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            (g[1] - g[0]) / h
        } else if i == n - 1 {
            (g[n - 1] - g[n - 2]) / h
        } else {
            (g[i + 1] - g[i - 1]) / (2.0 * h)
        };
        let qv = interp_uniform(&q.grid, &q.q_values, g[i]);
        out.push(qv * d.max(0.0).sqrt());
    }
    Ok(SrsfCurve { grid: q.grid, q_values: out })
}

/// Squared alignment cost `|| q1 - (q2 o gamma) sqrt(gamma') ||^2` by
/// trapezoidal quadrature on the full grid.
pub fn alignment_cost(q1: &SrsfCurve, q2: &SrsfCurve, gamma: &WarpingFunction) -> Result<f64> {
    let warped = warp_srsf(q2, gamma)?;
    let dt = q1.grid.dt();
    let sq: Vec<f64> = q1
        .q_values
        .iter()
        .zip(&warped.q_values)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    let mut acc = 0.0;
    for w in sq.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dt;
    }
    Ok(acc)
}

/// Slope-constrained predecessor steps for the DP lattice: all coprime
/// `(di, dj)` with entries in 1..=5, giving slopes in `[1/5, 5]`. The
/// diagonal step comes first so exact ties prefer the identity warp.
const DP_STEPS: [(usize, usize); 19] = [
    (1, 1),
    (1, 2),
    (2, 1),
    (2, 3),
    (3, 2),
    (3, 4),
    (4, 3),
    (4, 5),
    (5, 4),
    (1, 3),
    (3, 1),
    (2, 5),
    (5, 2),
    (3, 5),
    (5, 3),
    (1, 4),
    (4, 1),
    (1, 5),
    (5, 1),
];

/// Nodes above this count are uniformly downsampled to 300 lattice nodes.
const DP_MAX_FULL: usize = 600;
const DP_LATTICE: usize = 300;

/// Finds the warp minimizing `|| q1 - (q2 o gamma) sqrt(gamma') ||` over the
/// slope-constrained DP lattice. The returned warp is never costlier than the
/// identity warp (evaluated on the full grid).
pub fn optimal_warp(q1: &SrsfCurve, q2: &SrsfCurve) -> Result<WarpingFunction> {
    if q1.grid != q2.grid {
        return Err(Error::argument("optimal_warp needs a shared grid"));
    }
    let n = q1.grid.n_points;
    if n < 3 {
        return Err(Error::argument("optimal_warp needs at least 3 grid points"));
    }

    // Lattice of fine-grid indices.
    let lattice: Vec<usize> = if n > DP_MAX_FULL {
        let m = DP_LATTICE;
        let mut idx: Vec<usize> = (0..m)
            .map(|k| ((k as f64) * (n - 1) as f64 / (m - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        idx
    } else {
        (0..n).collect()
    };
    let m = lattice.len();
    let t_at = |k: usize| q1.grid.time(lattice[k]);
    let h_lat: Vec<f64> = (0..m).map(t_at).collect();

    // DP tables: accumulated cost and the step taken into each node.
    let mut cost = vec![f64::INFINITY; m * m];
    let mut step_in = vec![u8::MAX; m * m];
    cost[0] = 0.0;

    let q2v = &q2.q_values;
    let grid = &q1.grid;
    for i in 1..m {
        for (si, &(di, dj)) in DP_STEPS.iter().enumerate() {
            if i < di {
                continue;
            }
            let i0 = i - di;
            let ti0 = h_lat[i0];
            let ti = h_lat[i];
            let dt_seg = ti - ti0;
            for j in dj..m {
                let j0 = j - dj;
                let base = cost[i0 * m + j0];
                if !base.is_finite() {
                    continue;
                }
                let slope = (h_lat[j] - h_lat[j0]) / dt_seg;
                let sl = slope.sqrt();
                // Trapezoid over the template lattice nodes spanned by the step.
                let mut seg = 0.0;
                for k in 0..=di {
                    let tt = h_lat[i0 + k];
                    let g = h_lat[j0] + slope * (tt - ti0);
                    let q2g = interp_uniform(grid, q2v, g);
                    let d = q1.q_values[lattice[i0 + k]] - q2g * sl;
                    let w = if k == 0 || k == di { 0.5 } else { 1.0 };
                    seg += w * d * d;
                }
                seg *= dt_seg / di as f64;
                let tot = base + seg;
                if tot < cost[i * m + j] {
                    cost[i * m + j] = tot;
                    step_in[i * m + j] = si as u8;
                }
            }
        }
    }

    // Backtrack from the corner.
    let mut pts: Vec<(usize, usize)> = Vec::new();
    let (mut i, mut j) = (m - 1, m - 1);
    pts.push((i, j));
    while i != 0 || j != 0 {
        let s = step_in[i * m + j];
        if s == u8::MAX {
            return Err(Error::numeric("DP lattice has no admissible path"));
        }
        let (di, dj) = DP_STEPS[s as usize];
        i -= di;
        j -= dj;
        pts.push((i, j));
    }
    pts.reverse();

    // Piecewise-linear warp through the lattice path, sampled on the grid.
    let knot_t: Vec<f64> = pts.iter().map(|(i, _)| h_lat[*i]).collect();
    let knot_g: Vec<f64> = pts.iter().map(|(_, j)| h_lat[*j]).collect();
    let gamma_values: Vec<f64> = grid
        .times()
        .iter()
        .map(|t| stats::interp_linear(&knot_t, &knot_g, *t))
        .collect();
    let gamma = WarpingFunction::new(*grid, gamma_values)?;

    // Never return something costlier than doing nothing.
    let identity = WarpingFunction::identity(*grid);
    if alignment_cost(q1, q2, &gamma)? <= alignment_cost(q1, q2, &identity)? {
        Ok(gamma)
    } else {
        Ok(identity)
    }
}

/// Number of template refinement passes in [`align_ensemble`].
const KARCHER_ITERS: usize = 3;

/// Registers an ensemble against an iteratively refined template.
///
/// The template starts as the SRSF of the cross-sectional mean curve; each
/// pass re-warps the original curves against it and re-averages the SRSFs of
/// the warped curves. Three passes are enough for landmark spread to collapse
/// on smooth families.
pub fn align_ensemble(curves: &[TransientCurve]) -> Result<AlignedEnsemble> {
    if curves.len() < 2 {
        return Err(Error::argument("align_ensemble needs at least 2 curves"));
    }
    let grid = curves[0].grid;
    if curves.iter().any(|c| c.grid != grid) {
        return Err(Error::argument("all curves must share the grid"));
    }
    let n = grid.n_points;

    let mean_curve = |cs: &[TransientCurve]| -> TransientCurve {
        let mut acc = vec![0.0; n];
        for c in cs {
            for (a, v) in acc.iter_mut().zip(&c.values) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= cs.len() as f64;
        }
        TransientCurve { grid, values: acc }
    };

    let qs: Vec<SrsfCurve> = curves.iter().map(srsf).collect::<Result<_>>()?;
    let mut template = srsf(&mean_curve(curves))?;
    let mut warpings: Vec<WarpingFunction> = Vec::new();
    let mut warped: Vec<TransientCurve> = Vec::new();

    for _ in 0..KARCHER_ITERS {
        warpings = qs
            .iter()
            .map(|q| optimal_warp(&template, q))
            .collect::<Result<_>>()?;
        warped = curves
            .iter()
            .zip(&warpings)
            .map(|(c, g)| warp_curve(c, g))
            .collect::<Result<_>>()?;
        let mut acc = vec![0.0; n];
        for w in &warped {
            let qw = srsf(w)?;
            for (a, v) in acc.iter_mut().zip(&qw.q_values) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= warped.len() as f64;
        }
        template = SrsfCurve { grid, q_values: acc };
    }

    Ok(AlignedEnsemble { warped_curves: warped, warpings, template })
}

/// Relative range below which a warp is considered non-repairable.
const REPAIR_MIN_RANGE: f64 = 1e-6;

/// Monotone repair of a (typically PCA-reconstructed) warp: isotonic
/// projection, endpoint renormalization, 5-point moving-average smoothing,
/// and strictification. Inputs that are already strictly increasing only get
/// their endpoints renormalized, so alignment-produced warps pass through
/// unchanged. Fails on degenerate inputs such as a constant warp.
pub fn repair_warping(grid: &TimeGrid, raw: &[f64]) -> Result<WarpingFunction> {
    if raw.len() != grid.n_points {
        return Err(Error::argument("warping length does not match grid"));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("warping contains non-finite values"));
    }
    let span = grid.span();
    // Affine renormalization to the exact boundary.
    let renorm = |v: &[f64]| -> Result<Vec<f64>> {
        let (a, b) = (v[0], v[v.len() - 1]);
        if b - a < REPAIR_MIN_RANGE * span {
            return Err(Error::numeric("warping is degenerate"));
        }
        Ok(v.iter()
            .map(|x| grid.t_start + (x - a) * span / (b - a))
            .collect())
    };

    let clamped: Vec<f64> = raw
        .iter()
        .map(|x| x.clamp(grid.t_start, grid.t_end))
        .collect();
    if clamped.windows(2).all(|w| w[1] > w[0]) {
        return WarpingFunction::new(*grid, renorm(&clamped)?);
    }

    let iso = stats::isotonic_non_decreasing(&clamped);
    let smooth = stats::moving_average_symmetric(&renorm(&iso)?, 2);
    // Strictify flat runs left by the isotonic projection.
    let min_step = span * 1e-12;
    let mut strict = smooth;
    for i in 1..strict.len() {
        if strict[i] <= strict[i - 1] + min_step {
            strict[i] = strict[i - 1] + min_step;
        }
    }
    WarpingFunction::new(*grid, renorm(&strict)?)
}

/// Maps a warped curve back to the original time axis via
/// `f(t) = warped(gamma^{-1}(t))`, repairing the warp first.
pub fn reconstruct_curve(
    warped: &TransientCurve,
    gamma: &WarpingFunction,
) -> Result<TransientCurve> {
    if warped.grid != gamma.grid {
        return Err(Error::argument("curve and warping must share the grid"));
    }
    let repaired = repair_warping(&gamma.grid, &gamma.gamma_values)?;
    let inv = repaired.inverse_on_grid();
    let values: Vec<f64> = inv
        .iter()
        .map(|t| interp_uniform(&warped.grid, &warped.values, *t))
        .collect();
    Ok(TransientCurve { grid: warped.grid, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{lhs_sample, simulate_pct, CalibrationVector};
    use approx::assert_relative_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    fn curve_from_fn(g: TimeGrid, f: impl Fn(f64) -> f64) -> TransientCurve {
        let values = g.times().iter().map(|t| f(*t)).collect();
        TransientCurve { grid: g, values }
    }

    #[test]
    fn srsf_of_linear_is_one() {
        let g = grid(101);
        let f = curve_from_fn(g, |t| t + 1.0);
        let q = srsf(&f).unwrap();
        for v in &q.q_values {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn srsf_of_constant_is_zero() {
        let g = grid(51);
        let f = curve_from_fn(g, |_| 42.0);
        let q = srsf(&f).unwrap();
        assert!(q.q_values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn srsf_of_square_matches_analytic() {
        let g = grid(101);
        let f = curve_from_fn(g, |t| t * t + 1.0);
        let q = srsf(&f).unwrap();
        let h = g.dt();
        for (i, v) in q.q_values.iter().enumerate() {
            let truth = (2.0 * g.time(i)).sqrt();
            assert!(
                (v - truth).abs() <= 2.0 * h,
                "i={i} q={v} truth={truth}"
            );
        }
    }

    #[test]
    fn srsf_needs_three_points() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let f = TransientCurve { grid: g, values: vec![1.0, 2.0] };
        assert!(matches!(srsf(&f), Err(Error::Argument(_))));
    }

    #[test]
    fn srsf_round_trip_on_square() {
        let g = grid(201);
        let f = curve_from_fn(g, |t| t * t + 5.0);
        let q = srsf(&f).unwrap();
        let back = srsf_to_curve(&q, f.values[0]);
        for (a, b) in f.values.iter().zip(&back.values) {
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn srsf_to_curve_constant_and_linear() {
        let g = grid(11);
        let zero = SrsfCurve { grid: g, q_values: vec![0.0; 11] };
        let c = srsf_to_curve(&zero, 500.0);
        assert!(c.values.iter().all(|v| *v == 500.0));
        let one = SrsfCurve { grid: g, q_values: vec![1.0; 11] };
        let lin = srsf_to_curve(&one, 0.0);
        for (i, v) in lin.values.iter().enumerate() {
            assert_relative_eq!(*v, g.time(i), epsilon = 1e-12);
        }
    }

    /// A smooth boundary-fixed warp with bounded slopes for tests:
    /// gamma(u) = u + amp sin^2(pi u), slope 1 + amp pi sin(2 pi u).
    fn smooth_warp(g: TimeGrid, amp: f64) -> WarpingFunction {
        let span = g.span();
        let values = g
            .times()
            .iter()
            .map(|t| {
                let u = (t - g.t_start) / span;
                let w = u + amp * (std::f64::consts::PI * u).sin().powi(2);
                g.t_start + w * span
            })
            .collect::<Vec<_>>();
        WarpingFunction::new(g, values).unwrap()
    }

    #[test]
    fn warp_identity_and_round_trip() {
        let g = grid(201);
        let f = curve_from_fn(g, |t| 2.0 + (2.0 * std::f64::consts::PI * t).sin() * 0.5);
        let id = WarpingFunction::identity(g);
        let w = warp_curve(&f, &id).unwrap();
        assert_eq!(w.values, f.values);

        let gamma = smooth_warp(g, 0.15);
        let warped = warp_curve(&f, &gamma).unwrap();
        // invert numerically and warp back
        let inv = WarpingFunction::new(g, gamma.inverse_on_grid()).unwrap();
        let back = warp_curve(&warped, &inv).unwrap();
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!((a - b).abs() < 5e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn warp_constant_curve_is_constant() {
        let g = grid(101);
        let f = curve_from_fn(g, |_| 7.0);
        let gamma = smooth_warp(g, 0.2);
        let w = warp_curve(&f, &gamma).unwrap();
        assert!(w.values.iter().all(|v| (*v - 7.0).abs() < 1e-12));
    }

    #[test]
    fn warp_grid_mismatch_rejected() {
        let f = curve_from_fn(grid(101), |t| t + 1.0);
        let gamma = WarpingFunction::identity(grid(51));
        assert!(matches!(warp_curve(&f, &gamma), Err(Error::Argument(_))));
    }

    #[test]
    fn optimal_warp_of_identical_is_identity() {
        let g = grid(101);
        let f = curve_from_fn(g, |t| 1.0 + (3.0 * t - 1.0).tanh());
        let q = srsf(&f).unwrap();
        let gamma = optimal_warp(&q, &q).unwrap();
        let cell = g.dt();
        assert!(gamma.max_identity_deviation() <= cell + 1e-12);
    }

    #[test]
    fn optimal_warp_recovers_inverse_of_known_warp() {
        let g = grid(201);
        let f1 = curve_from_fn(g, |t| {
            1.0 + (-((t - 0.45) / 0.08).powi(2)).exp()
        });
        let gamma0 = smooth_warp(g, 0.12);
        let f2 = warp_curve(&f1, &gamma0).unwrap();
        let q1 = srsf(&f1).unwrap();
        let q2 = srsf(&f2).unwrap();
        let gamma = optimal_warp(&q1, &q2).unwrap();
        // gamma(gamma0) should be the identity within 2 lattice cells
        let tol = 2.0 * g.dt();
        for (i, t) in g.times().iter().enumerate() {
            let comp = stats::interp_linear(
                &g.times(),
                &gamma.gamma_values,
                gamma0.gamma_values[i],
            );
            assert!(
                (comp - t).abs() <= tol + 1e-9,
                "i={i} comp={comp} t={t}"
            );
        }
    }

    #[test]
    fn optimal_warp_aligns_shifted_peaks() {
        let g = grid(201);
        let bump = |c: f64| move |t: f64| 1.0 + (-((t - c) / 0.07).powi(2)).exp();
        let f1 = curve_from_fn(g, bump(0.4));
        let f2 = curve_from_fn(g, bump(0.55));
        let q1 = srsf(&f1).unwrap();
        let q2 = srsf(&f2).unwrap();
        let gamma = optimal_warp(&q1, &q2).unwrap();
        let aligned = warp_curve(&f2, &gamma).unwrap();
        assert!((aligned.peak_time() - f1.peak_time()).abs() <= g.dt() + 1e-12);
    }

    #[test]
    fn optimal_warp_cost_never_worse_than_identity() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let g = grid(151);
        for _ in 0..5 {
            let (a1, b1, c1) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let (a2, b2, c2) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let f1 = curve_from_fn(g, |t| {
                2.0 + a1 * (2.0 * std::f64::consts::PI * (t + c1)).sin()
                    + b1 * (-((t - 0.3) / 0.1).powi(2)).exp()
            });
            let f2 = curve_from_fn(g, |t| {
                2.0 + a2 * (2.0 * std::f64::consts::PI * (t + c2)).sin()
                    + b2 * (-((t - 0.6) / 0.15).powi(2)).exp()
            });
            let q1 = srsf(&f1).unwrap();
            let q2 = srsf(&f2).unwrap();
            let gamma = optimal_warp(&q1, &q2).unwrap();
            let c_opt = alignment_cost(&q1, &q2, &gamma).unwrap();
            let c_id =
                alignment_cost(&q1, &q2, &WarpingFunction::identity(g)).unwrap();
            assert!(c_opt <= c_id + 1e-12, "{c_opt} vs {c_id}");
        }
    }

    #[test]
    fn group_action_preserves_norm() {
        let g = grid(301);
        let f1 = curve_from_fn(g, |t| 1.0 + (-((t - 0.35) / 0.1).powi(2)).exp());
        let f2 = curve_from_fn(g, |t| 1.0 + 1.3 * (-((t - 0.6) / 0.12).powi(2)).exp());
        let q1 = srsf(&f1).unwrap();
        let q2 = srsf(&f2).unwrap();
        let gamma = optimal_warp(&q1, &q2).unwrap();
        let warped = warp_srsf(&q2, &gamma).unwrap();
        let n0 = q2.norm();
        let n1 = warped.norm();
        assert!((n1 - n0).abs() / n0 < 0.01, "norms {n0} vs {n1}");
    }

    #[test]
    fn align_identical_curves_gives_identity_warps() {
        let g = grid(101);
        let f = curve_from_fn(g, |t| 1.0 + (-((t - 0.5) / 0.1).powi(2)).exp());
        let ens = align_ensemble(&[f.clone(), f.clone(), f.clone()]).unwrap();
        for gamma in &ens.warpings {
            assert!(gamma.max_identity_deviation() <= g.dt() + 1e-12);
        }
        for w in &ens.warped_curves {
            for (a, b) in w.values.iter().zip(&f.values) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn align_rejects_single_curve() {
        let g = grid(101);
        let f = curve_from_fn(g, |t| t + 1.0);
        assert!(matches!(align_ensemble(&[f]), Err(Error::Argument(_))));
    }

    #[test]
    fn align_pair_of_shifted_bumps() {
        let g = grid(201);
        let bump = |c: f64| move |t: f64| 1.0 + (-((t - c) / 0.1).powi(2)).exp();
        let f1 = curve_from_fn(g, bump(0.44));
        let f2 = curve_from_fn(g, bump(0.56));
        let ens = align_ensemble(&[f1, f2]).unwrap();
        let p1 = ens.warped_curves[0].peak_time();
        let p2 = ens.warped_curves[1].peak_time();
        assert!((p1 - p2).abs() <= g.dt() + 1e-12, "{p1} vs {p2}");
    }

    #[test]
    fn repair_fixes_flat_segment() {
        let g = TimeGrid::new(0.0, 1.0, 21).unwrap();
        let mut raw = g.times();
        for i in 8..13 {
            raw[i] = raw[8]; // inject a flat segment
        }
        let repaired = repair_warping(&g, &raw).unwrap();
        assert!(repaired
            .gamma_values
            .windows(2)
            .all(|w| w[1] > w[0]));
        repaired.validate().unwrap();
    }

    #[test]
    fn repair_rejects_constant() {
        let g = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let raw = vec![0.4; 11];
        assert!(matches!(repair_warping(&g, &raw), Err(Error::Numeric(_))));
    }

    #[test]
    fn reconstruct_with_identity_is_noop() {
        let g = grid(201);
        let f = curve_from_fn(g, |t| 2.0 + (3.0 * t).sin() * 0.3);
        let id = WarpingFunction::identity(g);
        let rec = reconstruct_curve(&f, &id).unwrap();
        assert_eq!(f.values, rec.values);
    }

    #[test]
    fn ensemble_round_trip_tolerances_on_synthetic_family() {
        // 25 curves keep the unit test quick; the acceptance suite runs 100.
        let g = TimeGrid::default_grid();
        let thetas = lhs_sample(25, &[(0.4, 2.2); 4], 7).unwrap();
        let curves: Vec<TransientCurve> = thetas
            .iter()
            .map(|t| simulate_pct(t, &g).unwrap())
            .collect();
        let ens = align_ensemble(&curves).unwrap();
        for (orig, (w, gamma)) in curves
            .iter()
            .zip(ens.warped_curves.iter().zip(&ens.warpings))
        {
            let rec = reconstruct_curve(w, gamma).unwrap();
            let tq = orig.quench_time();
            let dt = g.dt();
            for (i, (a, b)) in rec.values.iter().zip(&orig.values).enumerate() {
                let t = g.time(i);
                let err = (a - b).abs();
                if (t - tq).abs() <= 2.0 * dt + 1e-9 {
                    assert!(err <= 15.0, "near-quench err {err} at t={t}");
                } else {
                    assert!(err <= 1.0, "off-quench err {err} at t={t} (tq={tq})");
                }
            }
        }
    }

    #[test]
    fn reconstruct_after_degenerate_gamma_errors() {
        let g = grid(11);
        let f = curve_from_fn(g, |t| t + 1.0);
        let gamma = WarpingFunction { grid: g, gamma_values: vec![0.0; 11] };
        assert!(matches!(
            reconstruct_curve(&f, &gamma),
            Err(Error::Numeric(_))
        ));
    }
}

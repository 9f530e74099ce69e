//! Conventional PCA by SVD, plus the functional-PCA composite: independent
//! PCA models over landmark-aligned (warped) curves and over warping
//! functions, with reconstruction back to the original time axis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::align::{self, AlignedEnsemble, SrsfCurve, WarpingFunction};
use crate::error::{Error, Result};
use crate::sim::{TimeGrid, TransientCurve};

/// A p x N matrix whose rows are output dimensions and columns are samples.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    data: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 || data.ncols() < 2 {
            return Err(Error::argument(
                "data matrix needs at least 1 row and 2 columns",
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument("data matrix entries must be finite"));
        }
        Ok(DataMatrix { data })
    }

    /// Builds the matrix from equal-length sample columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::argument("no columns"));
        }
        let p = columns[0].len();
        if columns.iter().any(|c| c.len() != p) {
            return Err(Error::argument("columns have unequal lengths"));
        }
        let data = DMatrix::from_fn(p, columns.len(), |r, c| columns[c][r]);
        DataMatrix::new(data)
    }

    pub fn from_curves(curves: &[TransientCurve]) -> Result<Self> {
        let cols: Vec<Vec<f64>> = curves.iter().map(|c| c.values.clone()).collect();
        DataMatrix::from_columns(&cols)
    }

    pub fn from_warpings(warpings: &[WarpingFunction]) -> Result<Self> {
        let cols: Vec<Vec<f64>> = warpings.iter().map(|w| w.gamma_values.clone()).collect();
        DataMatrix::from_columns(&cols)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Truncation rule for [`fit_pca`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    /// Keep the smallest k whose cumulative explained variance reaches the
    /// target fraction in (0, 1].
    VarianceFraction(f64),
    /// Keep exactly k components (clamped to the matrix rank, with a flag).
    Components(usize),
}

/// Coordinates of a sample in the truncated PC basis.
pub type PcScores = DVector<f64>;

/// Mean vector, truncated orthonormal basis, and the full singular-value
/// spectrum of a centered data matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// Row means of the training matrix (length p).
    pub mean: Vec<f64>,
    /// p* x p basis with orthonormal rows (each row one component).
    pub basis: Vec<Vec<f64>>,
    /// All min(p, N) singular values, descending.
    pub singular_values: Vec<f64>,
    /// Number of training samples the model was fitted on.
    pub n_samples: usize,
    /// True when an explicit component request exceeded the matrix rank.
    pub truncated_to_rank: bool,
}

impl PcaModel {
    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn p_star(&self) -> usize {
        self.basis.len()
    }

    /// Fraction of total variance carried by each singular value.
    pub fn explained_variance_fractions(&self) -> Vec<f64> {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        self.singular_values
            .iter()
            .map(|s| s * s / total)
            .collect()
    }

    /// Cumulative explained variance of the retained components.
    pub fn retained_variance(&self) -> f64 {
        self.explained_variance_fractions()[..self.p_star()]
            .iter()
            .sum()
    }

    /// Per-component variance of the training scores (sigma_i^2 / (N - 1)).
    pub fn score_variances(&self) -> Vec<f64> {
        self.singular_values[..self.p_star()]
            .iter()
            .map(|s| s * s / (self.n_samples - 1) as f64)
            .collect()
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p_star(), self.p(), |r, c| self.basis[r][c])
    }
}

/// Relative singular-value threshold that defines the numerical rank.
const RANK_TOL: f64 = 1e-10;

/// Fits a mean-centered SVD model of the data with the requested truncation.
pub fn fit_pca(data: &DataMatrix, truncation: Truncation) -> Result<PcaModel> {
    let p = data.nrows();
    let n = data.ncols();
    let mean: Vec<f64> = (0..p)
        .map(|r| data.inner().row(r).iter().sum::<f64>() / n as f64)
        .collect();
    let mut centered = data.inner().clone();
    for (r, m) in mean.iter().enumerate() {
        for c in 0..n {
            centered[(r, c)] -= m;
        }
    }

    let svd = centered.svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::numeric("SVD did not produce singular vectors"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let singular_values: Vec<f64> = order.iter().map(|i| svd.singular_values[*i]).collect();

    let s_max = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values
        .iter()
        .filter(|s| **s > RANK_TOL * s_max.max(1.0))
        .count()
        .max(1);

    let (k, truncated_to_rank) = match truncation {
        Truncation::VarianceFraction(target) => {
            if !(0.0..=1.0).contains(&target) || target <= 0.0 {
                return Err(Error::argument(format!(
                    "variance target {target} must lie in (0, 1]"
                )));
            }
            let total: f64 = singular_values.iter().map(|s| s * s).sum();
            let mut acc = 0.0;
            let mut k = rank;
            for (i, s) in singular_values.iter().enumerate() {
                acc += s * s;
                if acc >= target * total - 1e-15 {
                    k = i + 1;
                    break;
                }
            }
            (k.min(rank), false)
        }
        Truncation::Components(k) => {
            if k < 1 || k > singular_values.len() {
                return Err(Error::argument(format!(
                    "component count {k} outside 1..={}",
                    singular_values.len()
                )));
            }
            (k.min(rank), k > rank)
        }
    };

    // Rows of the basis are PCs; fix each sign so the largest-magnitude
    // loading is positive, making serialized models backend-independent.
    let mut basis = Vec::with_capacity(k);
    for idx in order.iter().take(k) {
        let col = u.column(*idx);
        let mut row: Vec<f64> = col.iter().copied().collect();
        let dominant = row
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if dominant < 0.0 {
            for x in row.iter_mut() {
                *x = -*x;
            }
        }
        basis.push(row);
    }

    Ok(PcaModel { mean, basis, singular_values, n_samples: n, truncated_to_rank })
}

/// Projects a length-p sample onto the retained components.
pub fn project(model: &PcaModel, sample: &[f64]) -> Result<PcScores> {
    if sample.len() != model.p() {
        return Err(Error::argument(format!(
            "sample length {} does not match model dimension {}",
            sample.len(),
            model.p()
        )));
    }
    let centered = DVector::from_iterator(
        model.p(),
        sample.iter().zip(&model.mean).map(|(x, m)| x - m),
    );
    Ok(model.basis_matrix() * centered)
}

/// Reconstructs a length-p sample from PC scores.
pub fn reconstruct(model: &PcaModel, scores: &PcScores) -> Result<Vec<f64>> {
    if scores.len() != model.p_star() {
        return Err(Error::argument(format!(
            "score length {} does not match retained components {}",
            scores.len(),
            model.p_star()
        )));
    }
    let x = model.basis_matrix().transpose() * scores;
    Ok(x.iter().zip(&model.mean).map(|(a, m)| a + m).collect())
}

/// Transforms a p x p data covariance into the PC subspace,
/// `sigma* = P* sigma (P*)^T`, symmetrized against roundoff.
pub fn transform_covariance(model: &PcaModel, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = model.p();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::argument("covariance dimensions must match the model"));
    }
    let scale = sigma.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    for r in 0..p {
        for c in (r + 1)..p {
            if (sigma[(r, c)] - sigma[(c, r)]).abs() > 1e-8 * scale {
                return Err(Error::argument("covariance must be symmetric"));
            }
        }
    }
    let basis = model.basis_matrix();
    let mut out = &basis * sigma * basis.transpose();
    let k = out.nrows();
    for r in 0..k {
        for c in (r + 1)..k {
            let v = 0.5 * (out[(r, c)] + out[(c, r)]);
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
    }
    Ok(out)
}

/// Functional-PCA composite: independent models over warped curves and
/// warping functions plus the alignment template.
#[derive(Debug, Clone)]
pub struct FpcaModel {
    pub amplitude_pca: PcaModel,
    pub phase_pca: PcaModel,
    pub template: SrsfCurve,
    pub grid: TimeGrid,
}

impl FpcaModel {
    pub fn amplitude_k(&self) -> usize {
        self.amplitude_pca.p_star()
    }

    pub fn phase_k(&self) -> usize {
        self.phase_pca.p_star()
    }

    pub fn total_k(&self) -> usize {
        self.amplitude_k() + self.phase_k()
    }
}

/// Fits the two PCA models of the functional composite.
pub fn fpca_fit(
    aligned: &AlignedEnsemble,
    amplitude_k: usize,
    phase_k: usize,
) -> Result<FpcaModel> {
    if amplitude_k < 1 || phase_k < 1 {
        return Err(Error::argument("component counts must be >= 1"));
    }
    let grid = aligned.template.grid;
    let amp = DataMatrix::from_curves(&aligned.warped_curves)?;
    let phase = DataMatrix::from_warpings(&aligned.warpings)?;
    let amplitude_pca = fit_pca(&amp, Truncation::Components(amplitude_k))?;
    let phase_pca = fit_pca(&phase, Truncation::Components(phase_k))?;
    Ok(FpcaModel { amplitude_pca, phase_pca, template: aligned.template.clone(), grid })
}

/// Projects a curve through the functional composite: one alignment warp
/// against the template, then amplitude and phase projections.
pub fn fpca_project(model: &FpcaModel, curve: &TransientCurve) -> Result<(PcScores, PcScores)> {
    if curve.grid != model.grid {
        return Err(Error::argument("curve grid does not match the model"));
    }
    let q = align::srsf(curve)?;
    let gamma = align::optimal_warp(&model.template, &q)?;
    let warped = align::warp_curve(curve, &gamma)?;
    let amp = project(&model.amplitude_pca, &warped.values)?;
    let phase = project(&model.phase_pca, &gamma.gamma_values)?;
    Ok((amp, phase))
}

/// Inverse functional PCA: reconstruct the warped curve and the warp, repair
/// the warp, and map back to the original time axis.
pub fn fpca_reconstruct(
    model: &FpcaModel,
    amp_scores: &PcScores,
    phase_scores: &PcScores,
) -> Result<TransientCurve> {
    let warped_values = reconstruct(&model.amplitude_pca, amp_scores)?;
    let gamma_raw = reconstruct(&model.phase_pca, phase_scores)?;
    let warped = TransientCurve { grid: model.grid, values: warped_values };
    let gamma = align::repair_warping(&model.grid, &gamma_raw)?;
    align::reconstruct_curve(&warped, &gamma)
}

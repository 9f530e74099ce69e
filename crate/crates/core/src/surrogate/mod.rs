//! Trainable maps from calibration factors to PC scores with predictive
//! uncertainty: a multi-output GP, per-score deterministic networks, and
//! per-score Bayesian networks with the linear std-vs-prediction shortcut
//! that keeps MCMC cheap.

pub mod bnn;
pub mod dnn;
pub mod gp;
pub mod mlp;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub use bnn::{bnn_predict, train_bnn, BnnModel, DEFAULT_PREDICT_DRAWS};
pub use dnn::{train_dnn, DnnModel, EpochLog, TrainConfig, DEFAULT_ARCH};
pub use gp::{train_gp, GpModel, NUGGET_FLOOR};
pub use mlp::Normalization;

/// Re-export: the predictivity coefficient R^2.
pub use crate::stats::r_squared;

/// Disjoint train/validation/test index sets over a design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainTestSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random partition of `0..n` into train/validation/test with counts
/// rounded to the nearest integer. A zero count is only allowed when its
/// proportion is exactly zero.
pub fn split_data(n: usize, proportions: (f64, f64, f64), seed: u64) -> Result<TrainTestSplit> {
    let (pt, pv, ps) = proportions;
    if pt < 0.0 || pv < 0.0 || ps < 0.0 || pt <= 0.0 {
        return Err(Error::argument("proportions must be positive for train"));
    }
    if ((pt + pv + ps) - 1.0).abs() > 1e-9 {
        return Err(Error::argument("proportions must sum to 1"));
    }
    if n < 3 {
        return Err(Error::argument("split_data needs n >= 3"));
    }
    let n_val = (pv * n as f64).round() as usize;
    let n_test = (ps * n as f64).round() as usize;
    if n_val + n_test >= n {
        return Err(Error::argument("train split would be empty"));
    }
    let n_train = n - n_val - n_test;
    if (pv > 0.0 && n_val == 0) || (ps > 0.0 && n_test == 0) {
        return Err(Error::argument(
            "n too small: a positive proportion rounded to an empty split",
        ));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let train = idx[..n_train].to_vec();
    let validation = idx[n_train..n_train + n_val].to_vec();
    let test = idx[n_train + n_val..].to_vec();
    Ok(TrainTestSplit { train, validation, test })
}

/// Default floor for shortcut std predictions (standardized units).
pub const STD_FLOOR: f64 = 1e-4;
/// Silhouette score above which the two-cluster mode is used.
pub const CLUSTER_SILHOUETTE_THRESHOLD: f64 = 0.6;

/// Cheap map from a surrogate prediction to its predictive std: either a
/// least-squares line or, when the (prediction, std) pairs form two clear
/// clusters, a nearest-centroid lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StdShortcut {
    Linear {
        slope: f64,
        intercept: f64,
        floor: f64,
    },
    TwoCluster {
        /// (prediction centroid, mean std) per cluster.
        centroid_a: (f64, f64),
        centroid_b: (f64, f64),
        floor: f64,
    },
}

impl StdShortcut {
    /// Std estimate for a prediction, never below the floor.
    pub fn eval(&self, pred: f64) -> f64 {
        match self {
            StdShortcut::Linear { slope, intercept, floor } => {
                (slope * pred + intercept).max(*floor)
            }
            StdShortcut::TwoCluster { centroid_a, centroid_b, floor } => {
                let da = (pred - centroid_a.0).abs();
                let db = (pred - centroid_b.0).abs();
                let s = if da <= db { centroid_a.1 } else { centroid_b.1 };
                s.max(*floor)
            }
        }
    }

    pub fn is_cluster_mode(&self) -> bool {
        matches!(self, StdShortcut::TwoCluster { .. })
    }
}

/// Two-means clustering of standardized 2-D points; deterministic
/// initialization at the extreme prediction values.
fn two_means(pts: &[(f64, f64)]) -> (Vec<usize>, [(f64, f64); 2]) {
    let lo = pts
        .iter()
        .cloned()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let hi = pts
        .iter()
        .cloned()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let mut centers = [lo, hi];
    let mut assign = vec![0usize; pts.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in pts.iter().enumerate() {
            let d0 = (p.0 - centers[0].0).powi(2) + (p.1 - centers[0].1).powi(2);
            let d1 = (p.0 - centers[1].0).powi(2) + (p.1 - centers[1].1).powi(2);
            let a = usize::from(d1 < d0);
            if a != assign[i] {
                assign[i] = a;
                changed = true;
            }
        }
        for c in 0..2 {
            let members: Vec<&(f64, f64)> =
                pts.iter().zip(&assign).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let mx = members.iter().map(|p| p.0).sum::<f64>() / members.len() as f64;
                let my = members.iter().map(|p| p.1).sum::<f64>() / members.len() as f64;
                centers[c] = (mx, my);
            }
        }
        if !changed {
            break;
        }
    }
    (assign, centers)
}

/// Mean silhouette score of a 2-clustering in standardized coordinates.
fn silhouette(pts: &[(f64, f64)], assign: &[usize]) -> f64 {
    let dist = |a: &(f64, f64), b: &(f64, f64)| -> f64 {
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    };
    let mut total = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let own: Vec<f64> = pts
            .iter()
            .zip(assign)
            .enumerate()
            .filter(|(j, (_, a))| *j != i && **a == assign[i])
            .map(|(_, (q, _))| dist(p, q))
            .collect();
        let other: Vec<f64> = pts
            .iter()
            .zip(assign)
            .filter(|(_, a)| **a != assign[i])
            .map(|(q, _)| dist(p, q))
            .collect();
        if own.is_empty() || other.is_empty() {
            continue; // singleton or single cluster contributes 0
        }
        let a = own.iter().sum::<f64>() / own.len() as f64;
        let b = other.iter().sum::<f64>() / other.len() as f64;
        total += (b - a) / a.max(b);
    }
    total / pts.len() as f64
}

/// Fits the std shortcut from paired (prediction, std) observations:
/// least-squares line by default, switching to two-cluster lookup when the
/// 2-means silhouette exceeds the threshold.
pub fn fit_std_shortcut(preds: &[f64], stds: &[f64], floor: f64) -> Result<StdShortcut> {
    if preds.len() != stds.len() || preds.len() < 10 {
        return Err(Error::argument("fit_std_shortcut needs >= 10 pairs"));
    }
    let spread = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        hi - lo
    };
    let pred_range = spread(preds);
    let std_range = spread(stds);
    if pred_range == 0.0 {
        return Err(Error::argument("degenerate shortcut input: constant predictions"));
    }

    // Standardize both axes before clustering.
    let pm = stats::mean(preds);
    let ps = stats::std_dev(preds).max(1e-300);
    let sm = stats::mean(stds);
    let ss = stats::std_dev(stds);
    let pts: Vec<(f64, f64)> = preds
        .iter()
        .zip(stds)
        .map(|(p, s)| ((p - pm) / ps, if ss > 0.0 { (s - sm) / ss } else { 0.0 }))
        .collect();
    if std_range > 0.0 {
        let (assign, _) = two_means(&pts);
        let n1 = assign.iter().filter(|a| **a == 1).count();
        if n1 >= 2 && assign.len() - n1 >= 2 {
            let score = silhouette(&pts, &assign);
            if score > CLUSTER_SILHOUETTE_THRESHOLD {
                let centroid = |c: usize| -> (f64, f64) {
                    let sel: Vec<(f64, f64)> = preds
                        .iter()
                        .zip(stds)
                        .zip(&assign)
                        .filter(|(_, a)| **a == c)
                        .map(|((p, s), _)| (*p, *s))
                        .collect();
                    let np = sel.len() as f64;
                    (
                        sel.iter().map(|x| x.0).sum::<f64>() / np,
                        sel.iter().map(|x| x.1).sum::<f64>() / np,
                    )
                };
                return Ok(StdShortcut::TwoCluster {
                    centroid_a: centroid(0),
                    centroid_b: centroid(1),
                    floor,
                });
            }
        }
    }
    let (slope, intercept) = stats::linear_fit(preds, stds)?;
    Ok(StdShortcut::Linear { slope, intercept, floor })
}

/// A trained map from a calibration point to PC-score means and, when the
/// realization supports it, per-score predictive stds.
#[derive(Debug)]
pub enum SurrogateModel {
    /// One multi-output GP shared across scores.
    Gp(GpModel),
    /// One deterministic network per score; no predictive std.
    PerScoreDnn(Vec<DnnModel>),
    /// One Bayesian network per score with its std shortcut.
    PerScoreBnn {
        nets: Vec<BnnModel>,
        shortcuts: Vec<StdShortcut>,
    },
}

impl SurrogateModel {
    pub fn n_outputs(&self) -> usize {
        match self {
            SurrogateModel::Gp(m) => m.n_outputs(),
            SurrogateModel::PerScoreDnn(ms) => ms.len(),
            SurrogateModel::PerScoreBnn { nets, .. } => nets.len(),
        }
    }

    /// Score means and optional per-score stds at `x`. The Bayesian variant
    /// evaluates each mean network once and reads its std from the shortcut,
    /// so this stays cheap inside MCMC.
    pub fn predict(&self, x: &[f64]) -> Result<(DVector<f64>, Option<DVector<f64>>)> {
        match self {
            SurrogateModel::Gp(m) => {
                let (mean, std) = m.predict(x)?;
                Ok((
                    DVector::from_vec(mean),
                    Some(DVector::from_vec(std)),
                ))
            }
            SurrogateModel::PerScoreDnn(ms) => {
                let mean: Vec<f64> = ms.iter().map(|m| m.predict(x)).collect();
                Ok((DVector::from_vec(mean), None))
            }
            SurrogateModel::PerScoreBnn { nets, shortcuts } => {
                let mut mean = Vec::with_capacity(nets.len());
                let mut std = Vec::with_capacity(nets.len());
                for (net, sc) in nets.iter().zip(shortcuts) {
                    let m = net.mean_network().predict(x);
                    mean.push(m);
                    std.push(sc.eval(m));
                }
                Ok((DVector::from_vec(mean), Some(DVector::from_vec(std))))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_match_paper_protocol() {
        let s = split_data(500, (0.7, 0.15, 0.15), 1).unwrap();
        assert_eq!(s.train.len(), 350);
        assert_eq!(s.validation.len(), 75);
        assert_eq!(s.test.len(), 75);
        // disjoint covering union
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
    }

    #[test]
    fn split_deterministic_and_all_train() {
        assert_eq!(
            split_data(100, (0.7, 0.15, 0.15), 9).unwrap(),
            split_data(100, (0.7, 0.15, 0.15), 9).unwrap()
        );
        let s = split_data(10, (1.0, 0.0, 0.0), 2).unwrap();
        assert_eq!(s.train.len(), 10);
        assert!(s.validation.is_empty());
        assert!(s.test.is_empty());
    }

    #[test]
    fn split_rejects_tiny_n() {
        assert!(matches!(
            split_data(2, (0.7, 0.15, 0.15), 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn shortcut_recovers_exact_line() {
        let preds: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let stds: Vec<f64> = preds.iter().map(|p| 0.1 * p + 0.02).collect();
        match fit_std_shortcut(&preds, &stds, STD_FLOOR).unwrap() {
            StdShortcut::Linear { slope, intercept, .. } => {
                assert!((slope - 0.1).abs() < 1e-8);
                assert!((intercept - 0.02).abs() < 1e-8);
            }
            other => panic!("expected linear mode, got {other:?}"),
        }
    }

    #[test]
    fn shortcut_two_blobs_switch_to_cluster_mode() {
        let mut preds = Vec::new();
        let mut stds = Vec::new();
        for i in 0..12 {
            preds.push(-2.0 + 0.01 * i as f64);
            stds.push(0.05 + 0.001 * i as f64);
        }
        for i in 0..12 {
            preds.push(3.0 + 0.01 * i as f64);
            stds.push(0.5 + 0.001 * i as f64);
        }
        let sc = fit_std_shortcut(&preds, &stds, STD_FLOOR).unwrap();
        assert!(sc.is_cluster_mode());
        assert!((sc.eval(-2.0) - 0.0555).abs() < 0.01);
        assert!((sc.eval(3.1) - 0.5055).abs() < 0.01);
    }

    #[test]
    fn shortcut_constant_stds_give_flat_line() {
        let preds: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let stds = vec![0.3; 15];
        match fit_std_shortcut(&preds, &stds, STD_FLOOR).unwrap() {
            StdShortcut::Linear { slope, intercept, .. } => {
                assert!(slope.abs() < 1e-12);
                assert!((intercept - 0.3).abs() < 1e-12);
            }
            other => panic!("expected linear mode, got {other:?}"),
        }
    }

    #[test]
    fn shortcut_rejects_degenerate_input() {
        let preds = vec![1.0; 12];
        let stds = vec![0.2; 12];
        assert!(matches!(
            fit_std_shortcut(&preds, &stds, STD_FLOOR),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            fit_std_shortcut(&[1.0; 5], &[0.1; 5], STD_FLOOR),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn shortcut_never_below_floor() {
        let preds: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let stds: Vec<f64> = preds.iter().map(|p| -0.5 * p + 0.01).collect();
        let sc = fit_std_shortcut(&preds, &stds, STD_FLOOR).unwrap();
        assert!(sc.eval(100.0) >= STD_FLOOR);
    }
}

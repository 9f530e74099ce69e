//! On-disk formats shared by the pipeline stages: CSV for curves, designs,
//! warps, matrices, chains, and bands; JSON for model manifests and
//! summaries. Artifact files carry no timestamps, so stage reruns are
//! byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::{AlignedEnsemble, SrsfCurve, WarpingFunction};
use crate::bayes::{ParamSummary, PosteriorChain};
use crate::error::{Error, Result};
use crate::fuq::PredictiveBand;
use crate::pca::{FpcaModel, PcaModel};
use crate::sim::{CalibrationVector, TimeGrid, TransientCurve};

fn write_two_column(path: &Path, header: (&str, &str), xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header.0, header.1])?;
    for (x, y) in xs.iter().zip(ys) {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_two_column(path: &Path, expect: (&str, &str)) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::argument(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != expect.0 || &headers[1] != expect.1 {
        return Err(Error::argument(format!(
            "{}: expected header {},{}",
            path.display(),
            expect.0,
            expect.1
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::argument(format!("{}: bad number {s:?}", path.display())))
        };
        xs.push(parse(&rec[0])?);
        ys.push(parse(&rec[1])?);
    }
    if xs.len() < 2 {
        return Err(Error::argument(format!("{}: too few rows", path.display())));
    }
    Ok((xs, ys))
}

fn grid_from_times(times: &[f64], path: &Path) -> Result<TimeGrid> {
    let n = times.len();
    let grid = TimeGrid::new(times[0], times[n - 1], n)?;
    let dt = grid.dt();
    for (i, t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > 1e-6 * dt.max(1.0) {
            return Err(Error::argument(format!(
                "{}: time column is not a uniform grid",
                path.display()
            )));
        }
    }
    Ok(grid)
}

/// Writes a curve as `time_s,value_K`.
pub fn write_curve_csv(path: &Path, curve: &TransientCurve) -> Result<()> {
    write_two_column(path, ("time_s", "value_K"), &curve.grid.times(), &curve.values)
}

pub fn read_curve_csv(path: &Path) -> Result<TransientCurve> {
    let (ts, vs) = read_two_column(path, ("time_s", "value_K"))?;
    let grid = grid_from_times(&ts, path)?;
    Ok(TransientCurve { grid, values: vs })
}

/// Writes a warping function as `time_s,gamma_s`.
pub fn write_warping_csv(path: &Path, gamma: &WarpingFunction) -> Result<()> {
    write_two_column(path, ("time_s", "gamma_s"), &gamma.grid.times(), &gamma.gamma_values)
}

pub fn read_warping_csv(path: &Path) -> Result<WarpingFunction> {
    let (ts, gs) = read_two_column(path, ("time_s", "gamma_s"))?;
    let grid = grid_from_times(&ts, path)?;
    WarpingFunction::new(grid, gs)
}

/// Writes an SRSF as `time_s,q_value`.
pub fn write_srsf_csv(path: &Path, q: &SrsfCurve) -> Result<()> {
    write_two_column(path, ("time_s", "q_value"), &q.grid.times(), &q.q_values)
}

pub fn read_srsf_csv(path: &Path) -> Result<SrsfCurve> {
    let (ts, qs) = read_two_column(path, ("time_s", "q_value"))?;
    let grid = grid_from_times(&ts, path)?;
    Ok(SrsfCurve { grid, q_values: qs })
}

/// Writes a design as `p1009,p1010,p1011,p1031`.
pub fn write_design_csv(path: &Path, design: &[CalibrationVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p1009", "p1010", "p1011", "p1031"])?;
    for theta in design {
        let a = theta.as_array();
        w.write_record(a.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_design_csv(path: &Path) -> Result<Vec<CalibrationVector>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::argument(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let expect = ["p1009", "p1010", "p1011", "p1031"];
    if headers.iter().zip(expect).any(|(h, e)| h != e) {
        return Err(Error::argument(format!(
            "{}: expected header p1009,p1010,p1011,p1031",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut a = [0.0; 4];
        for (i, slot) in a.iter_mut().enumerate() {
            *slot = rec[i].parse::<f64>().map_err(|_| {
                Error::argument(format!("{}: bad number {:?}", path.display(), &rec[i]))
            })?;
        }
        out.push(CalibrationVector::from_array(a));
    }
    Ok(out)
}

/// Metadata stored next to an aligned-ensemble directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignedManifest {
    pub n_curves: usize,
    pub grid: TimeGrid,
}

/// Writes `warped_###.csv`, `gamma_###.csv`, `template.csv`, and
/// `manifest.json` into `dir`.
pub fn write_aligned_dir(dir: &Path, aligned: &AlignedEnsemble) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, (w, g)) in aligned
        .warped_curves
        .iter()
        .zip(&aligned.warpings)
        .enumerate()
    {
        write_curve_csv(&dir.join(format!("warped_{i:03}.csv")), w)?;
        write_warping_csv(&dir.join(format!("gamma_{i:03}.csv")), g)?;
    }
    write_srsf_csv(&dir.join("template.csv"), &aligned.template)?;
    let manifest = AlignedManifest {
        n_curves: aligned.warped_curves.len(),
        grid: aligned.template.grid,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

pub fn read_aligned_dir(dir: &Path) -> Result<AlignedEnsemble> {
    let manifest: AlignedManifest = read_json(&dir.join("manifest.json"))?;
    let mut warped = Vec::with_capacity(manifest.n_curves);
    let mut warpings = Vec::with_capacity(manifest.n_curves);
    for i in 0..manifest.n_curves {
        warped.push(read_curve_csv(&dir.join(format!("warped_{i:03}.csv")))?);
        warpings.push(read_warping_csv(&dir.join(format!("gamma_{i:03}.csv")))?);
    }
    let template = read_srsf_csv(&dir.join("template.csv"))?;
    Ok(AlignedEnsemble { warped_curves: warped, warpings, template })
}

fn write_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::argument(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|s| s.parse::<f64>()).collect();
        out.push(row.map_err(|_| {
            Error::argument(format!("{}: non-numeric matrix entry", path.display()))
        })?);
    }
    Ok(out)
}

/// JSON manifest for a PCA model stored as CSV matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaManifest {
    pub p: usize,
    pub p_star: usize,
    pub n_samples: usize,
    pub truncated_to_rank: bool,
    pub mean_file: String,
    pub basis_file: String,
    pub singular_values_file: String,
}

/// Writes `<name>_manifest.json`, `<name>_mean.csv`, `<name>_basis.csv`,
/// `<name>_singular_values.csv` into `dir`.
pub fn write_pca_model(dir: &Path, name: &str, model: &PcaModel) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = PcaManifest {
        p: model.p(),
        p_star: model.p_star(),
        n_samples: model.n_samples,
        truncated_to_rank: model.truncated_to_rank,
        mean_file: format!("{name}_mean.csv"),
        basis_file: format!("{name}_basis.csv"),
        singular_values_file: format!("{name}_singular_values.csv"),
    };
    write_matrix_csv(&dir.join(&manifest.mean_file), &[model.mean.clone()])?;
    write_matrix_csv(&dir.join(&manifest.basis_file), &model.basis)?;
    write_matrix_csv(
        &dir.join(&manifest.singular_values_file),
        &[model.singular_values.clone()],
    )?;
    write_json(&dir.join(format!("{name}_manifest.json")), &manifest)?;
    Ok(())
}

pub fn read_pca_model(dir: &Path, name: &str) -> Result<PcaModel> {
    let manifest: PcaManifest = read_json(&dir.join(format!("{name}_manifest.json")))?;
    let mean = read_matrix_csv(&dir.join(&manifest.mean_file))?
        .pop()
        .ok_or_else(|| Error::argument("empty mean file"))?;
    let basis = read_matrix_csv(&dir.join(&manifest.basis_file))?;
    let singular_values = read_matrix_csv(&dir.join(&manifest.singular_values_file))?
        .pop()
        .ok_or_else(|| Error::argument("empty singular value file"))?;
    if mean.len() != manifest.p || basis.len() != manifest.p_star {
        return Err(Error::argument("PCA manifest does not match matrices"));
    }
    Ok(PcaModel {
        mean,
        basis,
        singular_values,
        n_samples: manifest.n_samples,
        truncated_to_rank: manifest.truncated_to_rank,
    })
}

/// JSON manifest tying together the two PCA halves of a functional model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FpcaManifest {
    pub grid: TimeGrid,
    pub amplitude_name: String,
    pub phase_name: String,
    pub template_file: String,
}

pub fn write_fpca_model(dir: &Path, model: &FpcaModel) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_pca_model(dir, "amplitude", &model.amplitude_pca)?;
    write_pca_model(dir, "phase", &model.phase_pca)?;
    write_srsf_csv(&dir.join("template.csv"), &model.template)?;
    let manifest = FpcaManifest {
        grid: model.grid,
        amplitude_name: "amplitude".to_string(),
        phase_name: "phase".to_string(),
        template_file: "template.csv".to_string(),
    };
    write_json(&dir.join("fpca_manifest.json"), &manifest)?;
    Ok(())
}

pub fn read_fpca_model(dir: &Path) -> Result<FpcaModel> {
    let manifest: FpcaManifest = read_json(&dir.join("fpca_manifest.json"))?;
    Ok(FpcaModel {
        amplitude_pca: read_pca_model(dir, &manifest.amplitude_name)?,
        phase_pca: read_pca_model(dir, &manifest.phase_name)?,
        template: read_srsf_csv(&dir.join(&manifest.template_file))?,
        grid: manifest.grid,
    })
}

/// Writes a chain as `step,p1009,p1010,p1011,p1031,log_post,accepted`.
pub fn write_chain_csv(path: &Path, chain: &PosteriorChain) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = chain.dim();
    let mut header = vec!["step".to_string()];
    if d == 4 {
        for n in CalibrationVector::NAMES {
            header.push(n.to_lowercase());
        }
    } else {
        for j in 0..d {
            header.push(format!("x{j}"));
        }
    }
    header.push("log_post".to_string());
    header.push("accepted".to_string());
    w.write_record(&header)?;
    for (i, s) in chain.samples.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(s.iter().map(|x| x.to_string()));
        rec.push(chain.log_posts[i].to_string());
        rec.push((chain.accepted[i] as u8).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Posterior summary serialized in the reporting-table schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub method: String,
    pub parameters: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub ci95: [f64; 2],
}

pub fn summary_document(method: &str, summaries: &[ParamSummary]) -> SummaryDocument {
    SummaryDocument {
        method: method.to_string(),
        parameters: summaries
            .iter()
            .enumerate()
            .map(|(i, s)| SummaryRow {
                name: CalibrationVector::NAMES
                    .get(i)
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| format!("x{i}")),
                mean: s.mean,
                std: s.std,
                ci95: [s.ci_lower, s.ci_upper],
            })
            .collect(),
    }
}

/// Writes a band as `time_s,mean,lower,upper`.
pub fn write_band_csv(path: &Path, band: &PredictiveBand) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_s", "mean", "lower", "upper"])?;
    let times = band.grid.times();
    for i in 0..band.grid.n_points {
        w.write_record([
            times[i].to_string(),
            band.mean[i].to_string(),
            band.lower[i].to_string(),
            band.upper[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a training log as `epoch,train_loss,val_loss`.
pub fn write_training_log_csv(
    path: &Path,
    log: &[crate::surrogate::EpochLog],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for row in log {
        w.write_record([
            row.epoch.to_string(),
            row.train_loss.to_string(),
            row.val_loss.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes any value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let data = fs::read(path)
        .map_err(|e| Error::argument(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&data)?)
}

/// Lists curve files `curve_###.csv` inside an ensemble directory.
pub fn ensemble_curve_paths(dir: &Path, n: usize) -> Vec<PathBuf> {
    (0..n).map(|i| dir.join(format!("curve_{i:03}.csv"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate_pct;
    use tempfile::tempdir;

    #[test]
    fn curve_round_trip_and_rerun_byte_identical() {
        let dir = tempdir().unwrap();
        let g = TimeGrid::new(0.0, 500.0, 120).unwrap();
        let c = simulate_pct(&CalibrationVector::nominal(), &g).unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_curve_csv(&p1, &c).unwrap();
        write_curve_csv(&p2, &c).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        let back = read_curve_csv(&p1).unwrap();
        assert_eq!(back.values, c.values);
        assert_eq!(back.grid, c.grid);
    }

    #[test]
    fn design_round_trip() {
        let dir = tempdir().unwrap();
        let design = crate::sim::lhs_sample(15, &[(0.0, 5.0); 4], 4).unwrap();
        let p = dir.path().join("design.csv");
        write_design_csv(&p, &design).unwrap();
        assert_eq!(read_design_csv(&p).unwrap(), design);
    }

    #[test]
    fn corrupt_csv_reports_file_name() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "time_s,value_K\n1.0,abc\n2.0,3.0\n").unwrap();
        match read_curve_csv(&p) {
            Err(Error::Argument(msg)) => assert!(msg.contains("bad.csv"), "{msg}"),
            other => panic!("expected argument error, got {other:?}"),
        }
    }

    #[test]
    fn pca_model_round_trip() {
        use crate::pca::{fit_pca, DataMatrix, Truncation};
        let dir = tempdir().unwrap();
        let cols: Vec<Vec<f64>> = (0..12)
            .map(|j| (0..6).map(|r| (r * j) as f64 + 0.5).collect())
            .collect();
        let data = DataMatrix::from_columns(&cols).unwrap();
        let model = fit_pca(&data, Truncation::Components(2)).unwrap();
        write_pca_model(dir.path(), "test", &model).unwrap();
        let back = read_pca_model(dir.path(), "test").unwrap();
        assert_eq!(back.mean, model.mean);
        assert_eq!(back.basis, model.basis);
        assert_eq!(back.singular_values, model.singular_values);
    }

    #[test]
    fn aligned_dir_round_trip() {
        use crate::align::align_ensemble;
        let dir = tempdir().unwrap();
        let g = TimeGrid::new(0.0, 500.0, 100).unwrap();
        let thetas = crate::sim::lhs_sample(4, &[(0.7, 1.5); 4], 8).unwrap();
        let curves: Vec<TransientCurve> = thetas
            .iter()
            .map(|t| simulate_pct(t, &g).unwrap())
            .collect();
        let aligned = align_ensemble(&curves).unwrap();
        write_aligned_dir(dir.path(), &aligned).unwrap();
        let back = read_aligned_dir(dir.path()).unwrap();
        assert_eq!(back.warped_curves.len(), aligned.warped_curves.len());
        assert_eq!(back.template.q_values, aligned.template.q_values);
        assert_eq!(
            back.warpings[2].gamma_values,
            aligned.warpings[2].gamma_values
        );
    }
}

//! Scratch probe of end-to-end pipeline numbers (not part of the test suite).

use std::time::Instant;

use iuq_core::bayes::{chain_diagnostics, posterior_summary, McmcConfig};
use iuq_core::fuq::{coverage, propagate, EvalPath, SampleSource};
use iuq_core::pipeline::*;
use iuq_core::sim::*;

fn main() {
    let t0 = Instant::now();
    let grid = TimeGrid::new(0.0, 1000.0, 500).unwrap();
    let bounds = [(PRIOR_LO, PRIOR_HI); 4];
    let data = generate_ensemble(500, &bounds, 2024, &grid).unwrap();
    println!("[{:?}] ensemble", t0.elapsed());

    let theta_true = CalibrationVector::new(1.2, 1.1, 0.8, 1.0).unwrap();
    let experiment = synth_experiment(&theta_true, &grid, 10.0, 555).unwrap();

    // ---- method4 (fPCA + BNN + code uncertainty) across seeds
    let mut m4_stds = vec![vec![]; 4];
    let mut m3_stds = vec![vec![]; 4];
    for seed in 0..5u64 {
        let settings = MethodRunSettings::new(1000 + seed);
        let t1 = Instant::now();
        let run4 = run_method(Method::Method4, &data, &experiment, &settings).unwrap();
        println!(
            "[seed {seed}] method4 run in {:?}; r2={:?}",
            t1.elapsed(),
            run4
                .report
                .test_r2
                .iter()
                .map(|r| (r * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
        let summary = posterior_summary(&run4.chains[0]).unwrap();
        let within: Vec<bool> = summary
            .iter()
            .zip(theta_true.as_array())
            .map(|(s, t)| s.ci_lower <= t && t <= s.ci_upper)
            .collect();
        let diag = chain_diagnostics(&[&run4.chains[0]]).unwrap();
        println!(
            "  post mean {:?} std {:?} within {:?} acc {:.2}",
            summary.iter().map(|s| (s.mean * 100.0).round() / 100.0).collect::<Vec<_>>(),
            summary.iter().map(|s| (s.std * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            within,
            diag.acceptance,
        );
        for (j, s) in summary.iter().enumerate() {
            m4_stds[j].push(s.std);
        }

        let t2 = Instant::now();
        let run3 = run_method(Method::Method3, &data, &experiment, &settings).unwrap();
        let summary3 = posterior_summary(&run3.chains[0]).unwrap();
        for (j, s) in summary3.iter().enumerate() {
            m3_stds[j].push(s.std);
        }
        println!(
            "  method3 in {:?} std {:?}",
            t2.elapsed(),
            summary3.iter().map(|s| (s.std * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );

        if seed == 0 {
            // FUQ bands
            let draws = posterior_draws(&run4.chains[0], 1000);
            let eval = run4.problem.surrogate_curve_eval(grid);
            let band = propagate(
                &draws,
                &eval,
                &grid,
                (0.025, 0.975),
                SampleSource::Posterior,
                EvalPath::Surrogate,
            )
            .unwrap();
            let cov_gen = coverage(&band, &experiment).unwrap();
            let fresh = synth_experiment(&theta_true, &grid, 10.0, 777).unwrap();
            let cov_fresh = coverage(&band, &fresh).unwrap();
            println!(
                "  band width {:.1} cov_gen {:.3} cov_fresh {:.3} fails {}",
                band.mean_width(),
                cov_gen,
                cov_fresh,
                band.n_failures
            );
            let prior_draws_v = lhs_sample(1000, &bounds, 31).unwrap();
            let full = |t: &CalibrationVector| simulate_pct(t, &grid);
            let prior_band = propagate(
                &prior_draws_v,
                &full,
                &grid,
                (0.025, 0.975),
                SampleSource::Prior,
                EvalPath::FullModel,
            )
            .unwrap();
            println!(
                "  prior width {:.1} vs posterior width {:.1}",
                prior_band.mean_width(),
                band.mean_width()
            );
        }
    }
    for j in 0..4 {
        let m4: f64 = m4_stds[j].iter().sum::<f64>() / 5.0;
        let m3: f64 = m3_stds[j].iter().sum::<f64>() / 5.0;
        println!(
            "param {j}: m4 std {:.4} m3 std {:.4} ratio {:.3}",
            m4,
            m3,
            m4 / m3
        );
    }
    println!("total {:?}", t0.elapsed());
}

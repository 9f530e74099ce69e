//! `iuq`: staged Bayesian inverse-UQ pipeline against the built-in synthetic
//! transient simulator.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numeric failure.

mod config;
mod stages;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use iuq_core::pipeline::Method;
use iuq_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "iuq", about = "Bayesian inverse UQ pipeline for transient responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Method preset overriding (PCA method, surrogate, code uncertainty).
    #[arg(long, global = true, value_parser = ["method1", "method2", "method3", "method4"])]
    preset: Option<String>,

    /// Override every stage seed from one base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default: out).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write the Latin-hypercube design.
    Sample,
    /// Simulate one curve per design row plus the synthetic experiment.
    Simulate,
    /// Functional registration of the simulated ensemble.
    Align,
    /// Fit the configured dimensionality reduction.
    Pca,
    /// Train the configured surrogate family on PC scores.
    Train,
    /// Run adaptive Metropolis and summarize the posterior.
    Iuq,
    /// Propagate posterior/prior samples into predictive bands.
    Fuq,
    /// Bundle a JSON + SVG report of the whole run.
    Report,
    /// Write the effective config to stdout.
    PrintConfig,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Numeric(_) | CoreError::Training(_) => EXIT_NUMERIC,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(preset) = &cli.preset {
        cfg.apply_preset(Method::parse(preset)?);
    }
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    cfg.validate()?;

    match cli.command {
        Command::Sample => stages::cmd_sample(&cfg, &cli.out),
        Command::Simulate => stages::cmd_simulate(&cfg, &cli.out),
        Command::Align => stages::cmd_align(&cfg, &cli.out),
        Command::Pca => stages::cmd_pca(&cfg, &cli.out),
        Command::Train => stages::cmd_train(&cfg, &cli.out),
        Command::Iuq => stages::cmd_iuq(&cfg, &cli.out),
        Command::Fuq => stages::cmd_fuq(&cfg, &cli.out),
        Command::Report => stages::cmd_report(&cfg, &cli.out),
        Command::PrintConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

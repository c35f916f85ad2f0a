//! `lad`: seeded sensor-fusion experiments from the terminal.
//!
//! Every subcommand resolves its settings (defaults, then `--config`, then
//! flags), runs one experiment, and writes CSV tables plus a manifest with
//! content digests into the output directory. Exit codes: 0 on success, 2
//! for configuration errors, 3 for numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lad_cli::config::{Experiment, FileConfig, Overrides, Settings};
use lad_cli::experiments;
use lad_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "lad",
    version,
    about = "Landmark alternating-diffusion experiments",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; keys override the experiment's defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; trial seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for tables and the manifest.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Use the published experiment sizes instead of the desk-scale defaults.
    #[arg(long, global = true)]
    paper_scale: bool,

    /// Worker threads for dense assembly (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a paired dataset and a landmark set, and write both.
    Generate,
    /// Build one fused embedding (AD or LAD) and write its coordinates.
    Embed,
    /// Compare LAD against AD across landmark counts.
    LandmarkSweep,
    /// Compare LAD against AD across the alpha grid under two landmark schemes.
    AlphaSweep,
    /// Alignment of fused embeddings with each single-sensor diffusion map.
    InitialSensor,
    /// Four landmark-density cases across the alpha grid.
    LandmarkCases,
    /// Discrete-vs-continuum operator deviation rates over a bandwidth grid.
    VarianceRate,
    /// Wall-clock scaling of the AD and LAD pipelines.
    Bench,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Generate => Experiment::Generate,
            Command::Embed => Experiment::Embed,
            Command::LandmarkSweep => Experiment::LandmarkSweep,
            Command::AlphaSweep => Experiment::AlphaSweep,
            Command::InitialSensor => Experiment::InitialSensor,
            Command::LandmarkCases => Experiment::LandmarkCases,
            Command::VarianceRate => Experiment::VarianceRate,
            Command::Bench => Experiment::BenchTiming,
        }
    }
}

fn execute(cli: &Cli) -> Result<Settings> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let experiment = cli.command.experiment();
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let over = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        paper_scale: cli.paper_scale,
    };
    let settings = Settings::resolve(experiment, &file, &over)?;

    let outcome = match experiment {
        Experiment::Generate => experiments::generate_cmd::run(&settings)?,
        Experiment::Embed => experiments::embed_cmd::run(&settings)?,
        Experiment::LandmarkSweep => experiments::landmark_sweep::run(&settings)?,
        Experiment::AlphaSweep => experiments::alpha_sweep::run(&settings)?,
        Experiment::InitialSensor => experiments::initial_sensor::run(&settings)?,
        Experiment::LandmarkCases => experiments::landmark_cases::run(&settings)?,
        Experiment::VarianceRate => experiments::variance_rate::run(&settings)?,
        Experiment::BenchTiming => experiments::bench::run(&settings)?,
    };
    outcome.write(&settings)?;
    Ok(settings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(settings) => {
            println!(
                "{}: wrote {}",
                settings.experiment.id(),
                settings.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

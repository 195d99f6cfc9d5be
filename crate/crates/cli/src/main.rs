//! `levy-solow`: simulate and analyse the stochastic Solow model from the
//! command line. Every CSV is written with a `.meta.json` sidecar whose
//! `config` entry reproduces the run when passed back via `--config`.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Debug, Parser)]
#[command(
    name = "levy-solow",
    version,
    about = "Stochastic Solow growth model toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration, or a sidecar from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed of the noise streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override one configuration field, e.g. `params.noise.sigma=0.2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// One trajectory of the configured variant.
    Simulate,
    /// Equilibria over a steepness grid.
    Bifurcate,
    /// Phase lines and potentials of the deterministic model.
    PhasePotential,
    /// Largest Lyapunov exponent over noise scales and seeds.
    Lyapunov,
    /// Full versus reduced slow–fast comparison.
    Slowfast,
    /// Monte Carlo ensemble statistics.
    Ensemble,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Bifurcate => "bifurcate",
            Command::PhasePotential => "phase-potential",
            Command::Lyapunov => "lyapunov",
            Command::Slowfast => "slowfast",
            Command::Ensemble => "ensemble",
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = config::load(
        cli.config.as_deref(),
        &Overrides {
            seed: cli.seed,
            sets: &cli.sets,
        },
    )?;
    let out = OutputDir::create(&cli.out, cli.command.name(), &cfg)?;
    match cli.command {
        Command::Simulate => commands::simulate_cmd(&cfg, &out),
        Command::Bifurcate => commands::bifurcate_cmd(&cfg, &out),
        Command::PhasePotential => commands::phase_potential_cmd(&cfg, &out),
        Command::Lyapunov => commands::lyapunov_cmd(&cfg, &out),
        Command::Slowfast => commands::slowfast_cmd(&cfg, &out),
        Command::Ensemble => commands::ensemble_cmd(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("levy-solow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use hman_cli::commands;
use hman_cli::config::ExperimentConfig;
use hman_cli::error::CliError;

#[derive(Parser)]
#[command(name = "hman", about = "Hybrid multi-agent consensus experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's out_dir, then to ".".
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG plots next to the CSV outputs.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and report the consensus time.
    Simulate,
    /// Compare exact mean square deviations with Monte Carlo estimates.
    Msd,
    /// Report decay rates, and compare them across rosters.
    Spectrum,
    /// Sweep random networks and compare consensus times with the bound.
    BoundSweep,
    /// Check the config and matrix without writing anything.
    Validate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Parse("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = cli
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg, &out_dir, cli.plot),
        Command::Msd => commands::cmd_msd(&cfg, &out_dir, cli.plot),
        Command::Spectrum => commands::cmd_spectrum(&cfg, &out_dir),
        Command::BoundSweep => commands::cmd_bound_sweep(&cfg, &out_dir, cli.plot),
        Command::Validate => commands::cmd_validate(&cfg),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

//! Command-line driver for the shear-flow wave solver.

mod commands;
mod config;
mod output;
mod verify;

use clap::{Parser, Subcommand};
use config::RunConfig;
use shearwave::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shearwave", version, about = "Linear waves on a free surface over a monotone shear flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML, or JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Verification suite to run (repeatable)
    #[arg(long, global = true)]
    suite: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalue branches, root census and eigenfunctions over a k grid
    Spectrum,
    /// Stability thresholds in surface tension, gravity and wavenumber
    Thresholds,
    /// Time evolution of an initial vorticity and its long-time diagnostics
    Evolve,
    /// Internal consistency checks
    Verify,
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli.config.as_deref().ok_or_else(|| Error::InvalidSpec("--config is required".into()))?;
    let cfg = RunConfig::load(path)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    prepare(&cli.out)?;
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &cli.out),
        Command::Thresholds => commands::thresholds_cmd(&cfg, &cli.out),
        Command::Evolve => commands::evolve_cmd(&cfg, &cli.out),
        Command::Verify => commands::verify_cmd(&cfg, &cli.out, &cli.suite),
    }
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::InvalidSpec(format!("cannot create {}: {e}", out.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `cns`: reproducible experiments on the perturbed compressible
//! Navier-Stokes system.
//!
//! Exit status: 0 on success, 1 when an acceptance gate fails, 2 on errors,
//! 3 when the decay series is identically zero and no slope can be fitted.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Status;
use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "cns", version, about = "Decay-rate experiments for compressible Navier-Stokes with a potential force")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit decay slopes of the linearized semigroup on a radial profile.
    LinearDecay(Common),
    /// Integrate the nonlinear system next to its linear reference.
    Nonlinear(Common),
    /// Run the inequality and invariant checkers; JSON lines on stdout.
    Check(Common),
    /// Solve for the stationary density and its weighted-norm certificate.
    Stationary(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Slope tolerance of the linear-decay gate (overrides `tolerance`).
    #[arg(long)]
    tolerance: Option<f64>,
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (common, action): (&Common, fn(&RunConfig) -> anyhow::Result<Status>) = match &cli.command {
        Command::LinearDecay(c) => (c, commands::linear_decay),
        Command::Nonlinear(c) => (c, commands::nonlinear),
        Command::Check(c) => (c, commands::check),
        Command::Stationary(c) => (c, commands::stationary),
    };
    let overrides = Overrides { out: common.out.clone(), seed: common.seed, tolerance: common.tolerance };
    let cfg = RunConfig::load(common.config.as_deref(), &overrides)?;
    action(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

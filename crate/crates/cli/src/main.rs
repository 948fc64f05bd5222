//! `vpsteady`: steady states of the spherically symmetric Vlasov-Poisson
//! system from a TOML config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{Invocation, Output};

#[derive(Debug, Parser)]
#[command(name = "vpsteady", version, about = "Vlasov-Poisson steady states: solve, sweep, portrait, check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sweep worker threads; overrides `run.threads` (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved for stochastic extensions; recorded but unused.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Integrate one profile at `run.omega_c`.
    Solve,
    /// Solve over `run.grid` and locate values where the radius diverges.
    Sweep,
    /// Integrate the `[portrait]` orbit bundle in the compact cube.
    Portrait,
    /// Evaluate the finite-radius criteria at `run.omega_c`.
    Check,
    /// List built-in families and their low-omega index.
    Models,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Portrait => "portrait",
            Command::Check => "check",
            Command::Models => "models",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Some(config::parse_config(path)?),
        None if cli.command == Command::Models => None,
        None => anyhow::bail!("--config is required for {}", cli.command.name()),
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.base_dir.join(&c.output.dir)))
        .unwrap_or_else(|| PathBuf::from("."));
    let precision = cfg.as_ref().map_or(vpsteady::export::FULL_PRECISION, |c| c.output.precision);
    let threads = cli.threads.or(cfg.as_ref().map(|c| c.run.threads)).unwrap_or(0);
    let out = Output::prepare(&out_dir, precision)?;

    let results = match (cli.command, &cfg) {
        (Command::Solve, Some(c)) => commands::cmd_solve(c, &out)?,
        (Command::Sweep, Some(c)) => commands::cmd_sweep(c, &out, threads)?,
        (Command::Portrait, Some(c)) => commands::cmd_portrait(c, &out)?,
        (Command::Check, Some(c)) => commands::cmd_check(c, &out)?,
        (Command::Models, c) => commands::cmd_models(c.as_ref().map_or(0.0, |c| c.model.l), &out)?,
        _ => unreachable!("config presence checked above"),
    };
    let invocation = Invocation {
        command: cli.command.name().into(),
        out_dir,
        threads,
        seed: cli.seed,
    };
    out.summary(cfg.as_ref(), &invocation, results).context("writing summary")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! `cdc` — command-line front end for the collective pension simulator.
//!
//! Every subcommand reads one TOML experiment config, runs on a local
//! thread pool, and writes CSV artifacts plus a `manifest.json` with the
//! SHA-256 of each file. The same config and seed produce byte-identical
//! artifacts at any thread count.
//!
//! Exit codes: 0 on success, 1 when `validate` finds failing checks, 2 for
//! configuration or runtime errors.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::OutputWriter;

#[derive(Parser)]
#[command(name = "cdc", version, about = "Simulate and value collective defined contribution pension schemes")]
struct Cli {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,

    /// Override the output directory from the config
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,

    /// Override the worker thread count (0 = machine width)
    #[arg(long)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the fund through stochastic scenarios and write traces and fans
    Simulate,
    /// Solve the steady state: contribution rates and the age ledger
    SteadyState,
    /// Expected instantaneous profit and loss per generation and year
    PnlSurface,
    /// Conditional P&L curves in individual outer scenarios
    PnlScenarios,
    /// Replacement ratios against individual DC and pooled-annuity benchmarks
    Compare,
    /// Run the internal consistency checks and report PASS/FAIL per check
    Validate,
    /// Steady-state indexation response to an instantaneous asset shock
    Shock,
    /// Generation outcomes under shifted lifetime equity returns
    ShiftedReturns,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SteadyState => "steady_state",
            Command::PnlSurface => "pnl_surface",
            Command::PnlScenarios => "pnl_scenarios",
            Command::Compare => "compare",
            Command::Validate => "validate",
            Command::Shock => "shock",
            Command::ShiftedReturns => "shifted_returns",
        }
    }
}

fn main() {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(out) = cli.out {
        config.run.out = out;
    }
    let threads = cli.threads.unwrap_or(config.run.threads);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| dispatch(cli.command, &config))
}

fn dispatch(command: Command, config: &ExperimentConfig) -> Result<i32> {
    let mut writer = OutputWriter::new(&config.run.out, command.name(), config.run.seed, config.run.scenarios)?;
    let mut code = 0;
    match command {
        Command::Simulate => experiments::simulate(config, &mut writer)?,
        Command::SteadyState => experiments::steady_state(config, &mut writer)?,
        Command::PnlSurface => experiments::run_pnl_surface(config, &mut writer)?,
        Command::PnlScenarios => experiments::run_pnl_scenarios(config, &mut writer)?,
        Command::Compare => experiments::compare(config, &mut writer)?,
        Command::Shock => experiments::shock(config, &mut writer)?,
        Command::ShiftedReturns => experiments::shifted_returns(config, &mut writer)?,
        Command::Validate => {
            if !experiments::validate(config, &mut writer)? {
                code = 1;
            }
        }
    }
    writer.finish()?;
    eprintln!("{}: artifacts written to {}", command.name(), config.run.out.display());
    Ok(code)
}

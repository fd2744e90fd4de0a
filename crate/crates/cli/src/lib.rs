//! Command-line driver: JSON configs in, JSON-lines records and CSV tables out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod solve;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::RunConfig;
pub use error::CliError;
pub use solve::ResultRecord;

use commands::Context;
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "pvar", version, about = "Variational P-representation steady states with a truncated-Fock oracle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; otherwise `output.directory` from the config, then `.`.
    #[arg(long, global = true, env = "PVAR_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Fail on cutoff warnings (exit 3) and on non-converged records (exit 4).
    #[arg(long, global = true)]
    pub strict: bool,
    /// Worker threads for starts and independent sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the equations of motion of the tracked keys and write eom.json.
    DeriveEom,
    /// Minimize at the configured parameters.
    Solve,
    /// Minimize at every sweep point.
    Sweep,
    /// Truncated-Fock steady-state moments.
    Oracle,
    /// Variational against oracle moments.
    Compare,
    /// P and Wigner grids of a state or a solved mode.
    PhaseSpace,
    /// Wigner grids of the pairwise convolution table.
    Gallery,
}

/// Loads the config (or an empty one), applies overrides and runs the command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::from_json("{}")?,
    };
    if let Some(seed) = cli.seed {
        config.solver.seed = seed;
    }
    if cli.parallel == 0 {
        return Err(CliError::config("--parallel", "must be at least 1"));
    }
    let root = cli
        .out
        .clone()
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let out = OutputDir::create(root, config.hash())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.parallel)
        .build()
        .map_err(|e| CliError::config("--parallel", e))?;
    let ctx = Context { config: &config, out: &out, strict: cli.strict, pool: &pool };
    let outcome = match cli.command {
        Command::DeriveEom => commands::derive_eom(&ctx),
        Command::Solve => commands::solve(&ctx, false),
        Command::Sweep => commands::solve(&ctx, true),
        Command::Oracle => commands::oracle(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::PhaseSpace => commands::phase_space(&ctx),
        Command::Gallery => commands::gallery_cmd(&ctx),
    }?;
    if cli.strict && outcome.not_converged > 0 {
        return Err(CliError::Numerical(format!("{} records did not converge", outcome.not_converged)));
    }
    Ok(outcome)
}

/// Runs and maps the result to a process exit code, reporting on stderr.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(outcome) => {
            if outcome.not_converged > 0 {
                eprintln!("warning: {} records did not converge (flagged in the output)", outcome.not_converged);
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! `rmab`: batch front end for belief-state bandit experiments.
//!
//! Subcommands: `check` (closed-form optimality conditions, JSON),
//! `solve` (exact optimal vs myopic values, CSV), `simulate` (Monte Carlo,
//! CSV plus optional JSON-lines episode log), `verify` (randomized
//! verification suites) and `sweep` (Cartesian grid of solves).
//!
//! Exit codes: 0 ok, 2 config/usage error, 3 condition fails,
//! 4 indeterminate verdict, 5 node cap exceeded, 6 verification failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdError, CmdOutput, EXIT_PARSE};

#[derive(Parser)]
#[command(
    name = "rmab",
    version,
    about = "Belief-state bandit experiments: condition checks, exact planning, simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long, short)]
    config: PathBuf,

    /// Override a config field by dotted path, e.g. --set beta=0.95 or
    /// --set channels.0.p11=0.9. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Write output to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form optimality conditions (JSON report).
    Check(CommonArgs),
    /// Exact optimal and myopic values for one instance (CSV).
    Solve(CommonArgs),
    /// Monte Carlo simulation at channel and/or belief fidelity (CSV).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also dump every slot of every episode as JSON lines.
        #[arg(long, value_name = "PATH")]
        episode_log: Option<PathBuf>,
    },
    /// Run randomized verification suites from the config's verify section.
    Verify(CommonArgs),
    /// Cartesian sweep over the config's grids: one solve row per point.
    Sweep(CommonArgs),
}

fn deliver(common: &CommonArgs, result: Result<CmdOutput, CmdError>) -> ExitCode {
    match result {
        Ok(CmdOutput { text, exit }) => {
            let written = match &common.output {
                Some(path) => std::fs::write(path, &text)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::from(exit),
                Err(message) => {
                    eprintln!("rmab: {message}");
                    ExitCode::from(EXIT_PARSE)
                }
            }
        }
        Err(CmdError { exit, message }) => {
            eprintln!("rmab: {message}");
            ExitCode::from(exit)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Check(common)
        | Command::Solve(common)
        | Command::Verify(common)
        | Command::Sweep(common) => common,
        Command::Simulate { common, .. } => common,
    };
    let raw = match config::load_raw(&common.config, &common.overrides) {
        Ok(raw) => raw,
        Err(message) => {
            eprintln!("rmab: {message}");
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let result = match &cli.command {
        Command::Check(_) => commands::cmd_check(&raw),
        Command::Solve(_) => commands::cmd_solve(&raw),
        Command::Verify(_) => commands::cmd_verify(&raw),
        Command::Sweep(_) => commands::cmd_sweep(&raw),
        Command::Simulate { episode_log, .. } => {
            commands::cmd_simulate(&raw, episode_log.as_deref())
        }
    };
    deliver(common, result)
}

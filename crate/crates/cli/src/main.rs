//! `greennet` — scenario runner for the off-grid HetNet simulation
//! engines. Exit status: 0 on success, 2 on scenario/validation problems,
//! 3 on engine failures.

mod report;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use runner::{Engine, ValidationError};

#[derive(Parser)]
#[command(
    name = "greennet",
    version,
    about = "Simulate and size renewable-powered off-grid cellular networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Parser)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    /// Output directory (default: out/<scenario-name>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the scenario master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Restrict the optimizer to one site id.
    #[arg(long, value_name = "SITE")]
    site: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Hourly energy balance and inter-site sharing for every site.
    Dispatch(RunArgs),
    /// Grid-search the least-NPC component mix per site.
    Optimize(RunArgs),
    /// Monte-Carlo throughput / energy-efficiency evaluation.
    Radio(RunArgs),
    /// DRX / eDRX+PSM power-saving sweeps.
    Sched(RunArgs),
    /// Everything above in one run.
    All(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (engine, args) = match cli.command {
        Command::Dispatch(a) => (Engine::Dispatch, a),
        Command::Optimize(a) => (Engine::Optimize, a),
        Command::Radio(a) => (Engine::Radio, a),
        Command::Sched(a) => (Engine::Sched, a),
        Command::All(a) => (Engine::All, a),
    };
    match runner::run(
        &args.scenario,
        engine,
        args.out,
        args.seed,
        args.site.as_deref(),
    ) {
        Ok(manifest) => {
            println!(
                "wrote {} report(s) for scenario {:?} ({} ms)",
                manifest.outputs.len(),
                manifest.scenario_name,
                manifest.wall_clock_ms
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if err
                .chain()
                .any(|c| c.downcast_ref::<ValidationError>().is_some())
                || err.downcast_ref::<ValidationError>().is_some()
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

//! `routefit`: synthetic pools, probe training, layer sweeps and routing
//! evaluation. Each command reads an optional JSON config (`--config`),
//! applies flag overrides, and writes the merged config next to its outputs
//! so the snapshot alone reruns it.
//!
//! Exit codes: 0 ok, 2 config, 3 data, 4 numeric abort.

mod cmd;
mod config;
mod error;

use clap::{Parser, Subcommand};
use log::LevelFilter;

use error::Result;

#[derive(Debug, Parser)]
#[command(name = "routefit", version, about = "Probe-based model routing, evaluated by outcome replay")]
struct Cli {
    /// -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Synth(cmd::synth::SynthArgs),
    TrainDifficulty(cmd::train::TrainDifficultyArgs),
    TrainCorrectness(cmd::train::TrainCorrectnessArgs),
    SweepLayers(cmd::sweep::SweepArgs),
    RouteEval(cmd::route::RouteEvalArgs),
    Report(cmd::report::ReportArgs),
    Advantage(cmd::report::AdvantageArgs),
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd::synth::run(&cmd::synth::resolve(a)?),
        Command::TrainDifficulty(a) => cmd::train::run_difficulty(&cmd::train::resolve_difficulty(a)?),
        Command::TrainCorrectness(a) => cmd::train::run_correctness(&cmd::train::resolve_correctness(a)?),
        Command::SweepLayers(a) => cmd::sweep::run(&cmd::sweep::resolve(a)?),
        Command::RouteEval(a) => cmd::route::run(&cmd::route::resolve(a)?),
        Command::Report(a) => cmd::report::run_report(&cmd::report::resolve_report(a)?),
        Command::Advantage(a) => cmd::report::run_advantage(&cmd::report::resolve_advantage(a)?),
    }
}

fn main() {
    let cli = Cli::parse();
    // explicit builder: the environment is never consulted
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            _ => LevelFilter::Debug,
        })
        .target(env_logger::Target::Stderr)
        .init();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.kind.exit_code());
    }
}

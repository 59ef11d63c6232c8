mod cli;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use crate::cli::{Cli, Command, Mode};
use crate::commands::Experiment;
use crate::config::ExperimentConfig;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(seed) = cli.common.seed else {
        Cli::command()
            .error(
                ErrorKind::MissingRequiredArgument,
                "the --seed <SEED> argument is required",
            )
            .exit();
    };
    match run(&cli, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli, seed: u64) -> anyhow::Result<()> {
    let mut config = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply(&cli.common, seed)?;
    let experiment = Experiment {
        config,
        snapshot: cli.common.snapshot.as_deref(),
        out: &cli.common.out,
        seed,
    };

    let mode = match &cli.command {
        Command::Simulate => Mode::Simulate,
        Command::Compare => Mode::Compare,
        Command::Probe => Mode::Probe,
        Command::GameOracle => Mode::GameOracle,
        Command::Htlc2Trace => Mode::Htlc2Trace,
        Command::Run { mode } => *mode,
        Command::GenerateSnapshot { nodes } => {
            return commands::generate_snapshot(&experiment, *nodes)
        }
    };
    match mode {
        Mode::Simulate => commands::simulate(&experiment),
        Mode::Compare => commands::compare(&experiment),
        Mode::Probe => commands::probe(&experiment),
        Mode::GameOracle => commands::game_oracle(&experiment),
        Mode::Htlc2Trace => commands::htlc2_trace(&experiment),
    }
}

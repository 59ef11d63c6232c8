use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lnfee::FeeModel;

#[derive(Debug, Parser)]
#[command(
    name = "lnfee",
    version,
    about = "Routing-fee experiments on payment channel networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Simulate,
    Compare,
    Probe,
    GameOracle,
    Htlc2Trace,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one fee model; writes metrics.csv and records.jsonl.
    Simulate,
    /// Run all three fee models on the same payments; writes comparison.csv.
    Compare,
    /// Balance-probing cost curve; writes cost_curve.csv.
    Probe,
    /// Closed-form lock rule against the solved game tree; writes game_oracle.csv.
    GameOracle,
    /// Replay the two-lock protocol under a scripted adversary; writes htlc2_trace.jsonl.
    Htlc2Trace,
    /// Run the experiment named by --mode.
    Run {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Write a seeded synthetic snapshot.json.
    GenerateSnapshot {
        #[arg(long)]
        nodes: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML, or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Network snapshot (JSON). A synthetic network is used when absent.
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Base seed of every random draw. Required.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Risk factor r (per block and satoshi).
    #[arg(long, global = true)]
    pub risk: Option<f64>,
    /// original, guaranteed or incentivized.
    #[arg(long, global = true)]
    pub model: Option<FeeModel>,
    #[arg(long, global = true)]
    pub payments: Option<usize>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub pool: Option<usize>,
    /// Capacity of the probed channel.
    #[arg(long, global = true)]
    pub capacity: Option<u64>,
    /// Timelock of the probed hop, in blocks.
    #[arg(long, global = true)]
    pub timelock: Option<u32>,
    /// Stop bisecting once the interval is this narrow.
    #[arg(long, global = true)]
    pub granularity: Option<u64>,
}

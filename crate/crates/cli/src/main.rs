mod evaluate;
mod manifest;
mod overrides;
mod report;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure carrying its exit status: 2 for configuration problems, 1 otherwise.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "evmarl", version, about = "Train, evaluate and compare EV charging station controllers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RewardArg {
    /// Per-step urgency term on.
    Dense,
    /// Urgency term off, unmet demand charged at departure.
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeatherArg {
    Sunny,
    Cloudy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a controller and write checkpoint, curves and manifest.
    Train(TrainArgs),
    /// Roll out a checkpoint and write metrics and traces.
    Evaluate(EvaluateArgs),
    /// Aggregate evaluated runs into one comparison table.
    Report(ReportArgs),
}

#[derive(clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// lstm-maddpg, maddpg, madqn, zero or greedy.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long, value_enum)]
    pub reward: Option<RewardArg>,
    /// Override any config key, e.g. `--set train.batch_size=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(clap::Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the evaluation days' solar with a sunny or cloudy profile.
    #[arg(long, value_enum)]
    pub weather: Option<WeatherArg>,
    #[arg(long, value_enum, default_value = "off")]
    pub faults: Switch,
    /// Comma-separated seeds; each re-draws synthetic data and fault values.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(clap::Args)]
pub struct ReportArgs {
    /// Directories written by `evaluate`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Where to write the CSV table (stdout gets the text table either way).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Train(a) => train::run(a),
        Cmd::Evaluate(a) => evaluate::run(a),
        Cmd::Report(a) => report::run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

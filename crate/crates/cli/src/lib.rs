//! `plc`: simulate lossy channels, train the predictor and vocoder, conceal
//! losses and score the results.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use plc_core::Method;

pub use error::{exit, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "plc", version, about = "Packet loss concealment toolkit")]
pub struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed; falls back to the config file, then PLC_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gilbert-Elliot loss trace.
    Simulate(SimulateArgs),
    /// Write the log-Mel spectrogram of a WAV file as CSV.
    Features(FeaturesArgs),
    /// Train the Mel predictor on a directory of WAV files.
    TrainPredictor(TrainArgs),
    /// Train the flow vocoder on a directory of WAV files.
    TrainVocoder(TrainArgs),
    /// Conceal the packets a trace marks lost.
    Conceal(ConcealArgs),
    /// Score concealed audio against the reference.
    Eval(EvalArgs),
    /// Synthesize the desk-scale fixture corpus.
    MakeFixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Target mean packet loss rate.
    #[arg(long)]
    pub plr: Option<f64>,
    /// Burstiness: 0 is memoryless, values near 1 give long bursts.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Loss probability in the good state.
    #[arg(long)]
    pub pg: Option<f64>,
    /// Loss probability in the bad state.
    #[arg(long)]
    pub pb: Option<f64>,
    /// Number of packets.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of 16 kHz mono WAV files.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the configured number of optimizer steps.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConcealArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = "neural")]
    pub method: Method,
    #[arg(long)]
    pub predictor: Option<PathBuf>,
    #[arg(long)]
    pub vocoder: Option<PathBuf>,
    /// Latent deviation for vocoder sampling.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON report path; defaults to the output with a `.json` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Signal to score; repeat for several runs.
    #[arg(long, required = true)]
    pub test: Vec<PathBuf>,
    /// Trace behind each test signal, in the same order.
    #[arg(long)]
    pub trace: Vec<PathBuf>,
    /// Row label for each test signal; defaults to the file stem.
    #[arg(long)]
    pub label: Vec<String>,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = config::RunConfig::load_or_default(cli.config.as_deref())?;
    let seed = cfg.resolve_seed(cli.seed)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&cfg, seed, &a),
        Command::Features(a) => commands::features(&cfg, &a),
        Command::TrainPredictor(a) => commands::train_predictor(&cfg, seed, &a),
        Command::TrainVocoder(a) => commands::train_vocoder(&cfg, seed, &a),
        Command::Conceal(a) => commands::conceal(&cfg, seed, &a),
        Command::Eval(a) => commands::eval(&cfg, &a),
        Command::MakeFixtures(a) => commands::make_fixtures(seed, &a),
    }
}

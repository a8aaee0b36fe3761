//! Command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use permbet::stream::TiePolicy;
use permbet::Error;

#[derive(Debug, Parser)]
#[command(name = "permbet", version, about = "Anytime-valid sequential permutation tests by betting")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Significance level.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Master seed for all random streams (default 0, or the config's).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout if omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write a JSON run manifest to this path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Worker threads for simulations.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ties {
    Randomized,
    Conservative,
}

impl From<Ties> for TiePolicy {
    fn from(t: Ties) -> Self {
        match t {
            Ties::Randomized => TiePolicy::Randomized,
            Ties::Conservative => TiePolicy::Conservative,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct StrategyArgs {
    /// passive, aggressive, binomial, mixture (uniform prior), mixture_beta
    /// or mimicked.
    #[arg(long, default_value = "binomial")]
    pub strategy: String,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one sequential test on a statistic stream (first value is the
    /// observed statistic). Exit code 0 = rejected, 1 = not rejected.
    Test(TestArgs),
    /// Run a simulation experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Estimate resampling risk on Bernoulli loss streams.
    Riskscan(RiskArgs),
    /// Reconstruct a loss-count e-value as a table of sequential bets.
    Reconstruct(ReconstructArgs),
    /// Calibrate permutation p-values into e-values.
    Calibrate(CalibrateArgs),
    /// Classical p-values on an indicator file.
    Baselines(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Statistic file: CSV with a `y` column or one value per line. Reads
    /// standard input if omitted or `-`.
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Futility threshold (default alpha, 0 disables).
    #[arg(long)]
    pub futility: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: u64,
    #[arg(long, value_enum, default_value_t = Ties::Randomized)]
    pub ties: Ties,
    /// Apply stochastic rounding to the stopped e-value.
    #[arg(long)]
    pub rounding: bool,
    /// Record the wealth trajectory every N steps.
    #[arg(long)]
    pub trajectory: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Use the full trial count m = 2000 instead of the configured one.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub strategy: StrategyArgs,
    /// Comma-separated limiting p-values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub runs: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u64,
    #[arg(long)]
    pub rounding: bool,
    #[arg(long)]
    pub no_futility: bool,
    /// Use the randomized-threshold mixture with this epsilon instead.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKind {
    Perm,
    Bc,
    File,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long, value_enum)]
    pub target: TargetKind,
    /// Horizon of the permutation target, or maximum budget for the
    /// Besag–Clifford target.
    #[arg(long = "T")]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub h: Option<u64>,
    /// E-value vector file (JSON array or one value per line).
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Indicator file for an anytime p-value trajectory.
    #[arg(long)]
    pub indicators: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibratorKind {
    Harmonic,
    Sqrt,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum, default_value_t = CalibratorKind::Harmonic)]
    pub kind: CalibratorKind,
    #[arg(long = "T")]
    pub horizon: u64,
    /// Comma-separated p-values on the support (all support points if
    /// omitted).
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    Perm,
    Bc,
    Negbin,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Indicator file: CSV with an `indicator` column or one bit per line.
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BaselineKind::Perm)]
    pub method: BaselineKind,
    #[arg(long)]
    pub h: Option<u64>,
    #[arg(long = "T")]
    pub horizon: Option<u64>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::InvalidConfigKeys(keys) = &e {
                for k in keys {
                    eprintln!("  unknown key: {k}");
                }
            }
            ExitCode::from(2)
        }
    }
}

fn broken_pipe(e: &Error) -> bool {
    let kind = match e {
        Error::Io(e) => Some(e.kind()),
        Error::Json(e) => e.io_error_kind(),
        Error::Csv(e) => match e.kind() {
            csv::ErrorKind::Io(e) => Some(e.kind()),
            _ => None,
        },
        _ => None,
    };
    kind == Some(std::io::ErrorKind::BrokenPipe)
}

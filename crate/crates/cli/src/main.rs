//! Command-line front door: simulate, analyze, ingest, sweep.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 I/O. Every output file is
//! written atomically (temp file then rename) and every defaulted parameter
//! is echoed in the emitted metadata.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinmkt_core::model::{Boundary, PhiNoise};

#[derive(Debug, Parser)]
#[command(
    name = "spinmkt",
    version,
    about = "Interacting-agent market simulator and tail analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write the series plus metadata.
    Simulate(SimulateArgs),
    /// Classify return/volume tails of a series file and write a report.
    Analyze(AnalyzeArgs),
    /// Normalize a daily close/volume CSV into the shared series schema.
    Ingest(IngestArgs),
    /// Run replicated simulations over a rho grid and tabulate regimes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhiNoiseArg {
    Independent,
    Shared,
}

impl From<PhiNoiseArg> for PhiNoise {
    fn from(v: PhiNoiseArg) -> Self {
        match v {
            PhiNoiseArg::Independent => PhiNoise::Independent,
            PhiNoiseArg::Shared => PhiNoise::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Clamp,
    Reflect,
}

impl From<BoundaryArg> for Boundary {
    fn from(v: BoundaryArg) -> Self {
        match v {
            BoundaryArg::Clamp => Boundary::Clamp,
            BoundaryArg::Reflect => Boundary::Reflect,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Model parameters shared by `simulate` and `sweep`.
#[derive(Debug, Args)]
struct ModelArgs {
    /// Integration step.
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Price impact λ; back-solves the per-trader trade size b.
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of interacting traders.
    #[arg(long, default_value_t = 100_000)]
    n: u32,
    /// Shares per interacting trader per day; derives λ when given alone.
    #[arg(long)]
    b: Option<f64>,
    /// Std. dev. of the fundamental log-value increment per step.
    #[arg(long = "sigma-f", default_value_t = 0.0)]
    sigma_f: f64,
    /// Initial average attitude in [-1, 1].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x0: f64,
    /// Recorded steps.
    #[arg(long, default_value_t = 100_000)]
    steps: u32,
    /// Discarded initial steps.
    #[arg(long = "burn-in", default_value_t = 1_000)]
    burn_in: u32,
    /// Master RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise source for the random coupling.
    #[arg(long = "phi-noise", value_enum, default_value = "independent")]
    phi_noise: PhiNoiseArg,
    /// Handling of attitude updates leaving [-1, 1].
    #[arg(long, value_enum, default_value = "clamp")]
    boundary: BoundaryArg,
}

/// Tail-classification thresholds shared by `analyze` and `sweep`.
#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Quantile of |samples| above which the tail is fitted.
    #[arg(long = "q-threshold", default_value_t = spinmkt_core::tails::DEFAULT_Q_THRESHOLD)]
    q_threshold: f64,
    /// Fraction of the sample used by the Hill estimator.
    #[arg(long = "tail-fraction", default_value_t = spinmkt_core::tails::DEFAULT_TAIL_FRACTION)]
    tail_fraction: f64,
    /// Log-likelihood margin below which the verdict is indeterminate.
    #[arg(long = "margin-min", default_value_t = spinmkt_core::tails::DEFAULT_MARGIN_MIN)]
    margin_min: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Conformity effect ρ.
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Series format: csv writes series.csv, json writes series.json.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Series file in the shared `step,x,ln_s,ret,volume` schema.
    input: PathBuf,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Volume floor to subtract before tail analysis: `auto` reads b·n/2
    /// from a meta.json next to the input, `none` disables, or a number.
    #[arg(long = "volume-floor", default_value = "auto")]
    volume_floor: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Daily CSV with header `date,close,volume`.
    input: PathBuf,
    /// Label for the series; defaults to the input file stem.
    #[arg(long)]
    symbol: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated ascending ρ grid, e.g. `0.1,2,8`.
    #[arg(long, value_delimiter = ',', required = true)]
    rho: Vec<f64>,
    /// Seeds per grid point.
    #[arg(long, default_value_t = 10)]
    replicates: u32,
    /// Worker-pool size; does not affect output bytes.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Error classes mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };

    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Ingest(args) => commands::ingest(args),
        Command::Sweep(args) => commands::sweep(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinmkt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

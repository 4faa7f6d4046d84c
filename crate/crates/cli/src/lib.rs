//! `qkr` command-line driver: argument parsing, command dispatch and the
//! CSV/JSON writers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

mod commands;
pub mod output;

#[derive(Debug, Parser)]
#[command(name = "qkr", version, about = "Quantum kicked rotor near the Talbot-time resonance")]
pub struct Cli {
    /// Worker threads for scans (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, env = "QKR_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the zero-momentum state and write position and momentum densities.
    Evolve(EvolveArgs),
    /// Compare the full numerical density with the first-order correction sum.
    Perturbative(EvolveArgs),
    /// Sweep epsilon around the resonance and extract the profile width.
    Scan(ScanArgs),
    /// Fit resonance widths against kick number.
    Scaling(ScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SequenceArg {
    Periods,
    PulseTrain,
}

impl From<SequenceArg> for qkr_core::Sequence {
    fn from(s: SequenceArg) -> Self {
        match s {
            SequenceArg::Periods => qkr_core::Sequence::Periods,
            SequenceArg::PulseTrain => qkr_core::Sequence::PulseTrain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Position,
    Fidelity,
}

impl From<ModeArg> for qkr_core::ScanMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Position => qkr_core::ScanMode::Position,
            ModeArg::Fidelity => qkr_core::ScanMode::Fidelity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingMode {
    Position,
    Fidelity,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub kicks: usize,

    #[arg(long, default_value_t = 0.485, allow_negative_numbers = true)]
    pub phi_d: f64,

    /// Deviation from the Talbot time in units of T_B.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 1)]
    pub l: u32,

    /// Ladder half-width M; default ceil(N·phi_d) + 32 with automatic growth.
    #[arg(long)]
    pub basis: Option<usize>,

    /// Spatial grid points; default the smallest power of two ≥ 4(M + 1).
    #[arg(long)]
    pub grid: Option<usize>,

    #[arg(long, value_enum, default_value_t = SequenceArg::Periods)]
    pub sequence: SequenceArg,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsMax {
    Auto,
    Fixed(f64),
}

fn parse_eps_max(s: &str) -> Result<EpsMax, String> {
    if s == "auto" {
        return Ok(EpsMax::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(EpsMax::Fixed(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub kicks: usize,

    #[arg(long, value_enum)]
    pub mode: ModeArg,

    /// Half-range of the epsilon grid, or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_eps_max)]
    pub eps_max: EpsMax,

    /// Odd number of epsilon samples, at least 33.
    #[arg(long, default_value_t = qkr_core::scanner::DEFAULT_POINTS)]
    pub points: usize,

    #[arg(long, default_value_t = 0.485)]
    pub phi_d: f64,

    #[arg(long, default_value_t = 1)]
    pub l: u32,

    #[arg(long, value_enum, default_value_t = SequenceArg::PulseTrain)]
    pub sequence: SequenceArg,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[arg(long, default_value_t = 5)]
    pub n_from: usize,

    #[arg(long, default_value_t = 12)]
    pub n_to: usize,

    #[arg(long, value_enum, default_value_t = ScalingMode::Both)]
    pub mode: ScalingMode,

    /// CSV file with columns `N,width` used instead of simulated widths.
    #[arg(long)]
    pub fixture: Option<PathBuf>,

    #[arg(long, default_value_t = qkr_core::scanner::DEFAULT_POINTS)]
    pub points: usize,

    #[arg(long, default_value_t = 0.485)]
    pub phi_d: f64,

    #[arg(long, default_value_t = 1)]
    pub l: u32,

    #[arg(long, value_enum, default_value_t = SequenceArg::PulseTrain)]
    pub sequence: SequenceArg,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] qkr_core::Error),
    #[error("numerical health check failed: {0}")]
    Health(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(e) => match e.root() {
                qkr_core::Error::InvalidParameter(_) | qkr_core::Error::GridTooSmall { .. } => 2,
                _ => 3,
            },
            CliError::Health(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| match &cli.command {
        Command::Evolve(a) => commands::evolve(a),
        Command::Perturbative(a) => commands::perturbative(a),
        Command::Scan(a) => commands::scan(a),
        Command::Scaling(a) => commands::scaling(a),
    })
}

/// Parses, runs and maps the outcome to the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qkr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

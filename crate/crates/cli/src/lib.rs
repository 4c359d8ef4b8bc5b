//! `plna-yield` command line: argument parsing, dispatch and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use plna_yield::report::OutputFormat;
use plna_yield::SelectionStrategy;

mod commands;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "plna-yield",
    version,
    about = "Statistical yield analysis of fixed-bias and programmable LNAs"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON config file, or a built-in dataset name (`paper`, `paper-0.4mA`, ..., `paper-plna`).
    #[arg(long, global = true, default_value = "paper")]
    pub config: String,
    /// Base seed. Defaults to 7, or to the calibration seed for `calibrate`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dies per population. Defaults to 100000, or 20000 per evaluation for `calibrate`.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Latent model JSON replacing the PLNA's variability.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Receiver targets as `NF_DB,IIP3_DBM`, overriding the config.
    #[arg(long, global = true, value_parser = parse_targets)]
    pub targets: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Text => OutputFormat::Text,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Gaussian marginals from a mean and tail constraints, or list the fitted marginals of every design.
    Fit(FitArgs),
    /// Tune the PLNA's gain sigmas and correlations against the published post-selection results.
    Calibrate(CalibrateArgs),
    /// Generate populations and write summaries, violation rates and per-die CSVs.
    Simulate(SimulateArgs),
    /// Apply mode-selection strategies to the PLNA population.
    Select(SelectArgs),
    /// ΔS/ΔP of PLNA selections against fixed-bias baselines.
    Compare(CompareArgs),
    /// Sweep bias current and input width, filter, and pick the best IIP3 per current.
    Explore,
    /// Full pipeline: summaries, violations, baselines, selections and comparisons.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Mean of the marginal; with it, fit a single marginal from the tail options.
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    /// `VALUE:RATE`, RATE = P(X < VALUE).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
    pub below: Vec<(f64, f64)>,
    /// `VALUE:RATE`, RATE = P(X > VALUE).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
    pub above: Vec<(f64, f64)>,
    /// Smallest value observed in `--runs` draws.
    #[arg(long, allow_hyphen_values = true)]
    pub sample_min: Option<f64>,
    /// Largest value observed in `--runs` draws.
    #[arg(long, allow_hyphen_values = true)]
    pub sample_max: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    /// Gain target for the selection strategies, dB. Defaults to the config value.
    #[arg(long, allow_hyphen_values = true)]
    pub target_gain: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design ids (or nominal currents such as `0.4`). Defaults to all designs.
    #[arg(long, value_delimiter = ',')]
    pub design: Vec<String>,
    /// Skip the per-die population CSVs.
    #[arg(long)]
    pub no_population: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, value_delimiter = ',', default_value = "best-receiver")]
    pub strategy: Vec<SelectionStrategy>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_gain: Option<f64>,
    /// Calibrate the PLNA before selecting.
    #[arg(long)]
    pub calibrate: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline designs by id or nominal current.
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.5,0.6,0.7")]
    pub baselines: Vec<String>,
    /// Run these strategies now instead of reading `selection_*.json` from the output directory.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<SelectionStrategy>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_gain: Option<f64>,
    #[arg(long)]
    pub calibrate: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub target_gain: Option<f64>,
    /// Calibrate the PLNA first.
    #[arg(long)]
    pub calibrate: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected VALUE:RATE, got '{s}'"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("'{b}': {e}"))?;
    Ok((a, b))
}

fn parse_targets(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected NF_DB,IIP3_DBM, got '{s}'"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("'{a}': {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("'{b}': {e}"))?;
    Ok((a, b))
}

/// Failure of a parsed command, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<plna_yield::Error> for CliError {
    fn from(e: plna_yield::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

macro_rules! via_core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                plna_yield::Error::from(e).into()
            }
        }
    )*};
}

via_core_error!(
    plna_yield::error::BudgetError,
    plna_yield::error::StatError,
    plna_yield::error::DesignError,
    plna_yield::error::ConfigError,
    plna_yield::error::SelectionError,
    plna_yield::error::ReportError
);

/// Parse `args` (program name first) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("plna-yield: {e}");
            e.exit_code()
        }
    }
}

//! `pegfx`: pricing, calibration, simulation and hedging of pegged FX options.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use pegfx::calibration::PricingMethod;
use pegfx::simulation::{Scenario, Strategy};
use pegfx::{ErrorKind, RsParams};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pegfx::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Argument => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "pegfx",
    version,
    about = "Regime-switching FX option toolkit for pegged currencies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact, Fourier and approximate prices and deltas of one option.
    Price(PriceArgs),
    /// Fit the model (and optionally SABR) to each quoted tenor of a date.
    Calibrate(CalibrateArgs),
    /// Build the daily parameter surface on the maturity grid.
    Surface(SurfaceArgs),
    /// Hedging experiment on simulated paths.
    Simulate(SimulateArgs),
    /// Hedge written calls along a quote history with stored surfaces.
    Hedge(HedgeArgs),
    /// Write quote files generated by known parameters.
    GenSynthetic(GenArgs),
    /// Wall-clock comparisons of pricers, deltas and hedge ratios.
    Bench(BenchArgs),
}

fn parse_theta(s: &str) -> Result<RsParams, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("expected five numbers sl,sh,lambda,u,delta: {e}"))?;
    if v.len() != 5 {
        return Err(format!(
            "expected five numbers sl,sh,lambda,u,delta, got {}",
            v.len()
        ));
    }
    RsParams::from_slice(&v).map_err(|e| e.to_string())
}

/// Comma-separated strategy list taken as a single argument.
#[derive(Debug, Clone)]
pub struct StrategyList(pub Vec<Strategy>);

fn parse_strategies(s: &str) -> Result<StrategyList, String> {
    Strategy::parse_list(s)
        .map(StrategyList)
        .map_err(|e| e.to_string())
}

const DEFAULT_THETA: &str = "0.005,0.10,0.2,-0.01,0";

#[derive(Debug, Args)]
struct ThetaArg {
    /// Model parameters `sigma_low,sigma_high,lambda,u,delta`.
    #[arg(long, value_parser = parse_theta, default_value = DEFAULT_THETA, allow_hyphen_values = true)]
    theta: RsParams,
}

#[derive(Debug, Args)]
struct MarketArgs {
    #[arg(long, default_value_t = 7.8)]
    spot: f64,
    /// Domestic rate, continuously compounded.
    #[arg(long, default_value_t = 0.01)]
    rd: f64,
    /// Foreign rate, continuously compounded.
    #[arg(long, default_value_t = 0.015)]
    rf: f64,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long)]
    strike: f64,
    /// Maturity in years.
    #[arg(long)]
    maturity: f64,
    #[command(flatten)]
    theta: ThetaArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Directory of `quotes_<tenor>.csv` files.
    #[arg(long)]
    quotes: PathBuf,
    /// Valuation date; defaults to the first date in the files.
    #[arg(long)]
    date: Option<NaiveDate>,
    #[arg(long, default_value = "fourier")]
    pricer: PricingMethod,
    /// Also fit SABR to each smile.
    #[arg(long)]
    sabr: bool,
    /// Calibrate the jump dispersion instead of pinning it at zero.
    #[arg(long)]
    free_delta: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    quotes: PathBuf,
    /// Dates to build (repeatable); all dates in the files when omitted.
    #[arg(long)]
    date: Vec<NaiveDate>,
    #[arg(long, default_value = "fourier")]
    pricer: PricingMethod,
    /// Grid maturities, spaced one business day apart.
    #[arg(long, default_value_t = pegfx::calibration::SURFACE_POINTS)]
    points: usize,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "no-jump")]
    scenario: Scenario,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated strategies, or `all`.
    #[arg(long, value_parser = parse_strategies, default_value = "all")]
    strategies: StrategyList,
    #[command(flatten)]
    theta: ThetaArg,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, default_value_t = 7.8)]
    strike: f64,
    #[arg(long, default_value_t = 0.5)]
    maturity: f64,
    /// Rebalancing steps over the maturity.
    #[arg(long, default_value_t = 130)]
    steps: usize,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HedgeArgs {
    /// Directory holding `quotes_6M.csv`, whose rows are the rebalancing
    /// calendar.
    #[arg(long)]
    quotes: PathBuf,
    /// Directory of `surface_<date>.json` files.
    #[arg(long)]
    surfaces: PathBuf,
    /// Start dates (repeatable); every date with a full horizon when omitted.
    #[arg(long)]
    start: Vec<NaiveDate>,
    #[arg(long, default_value_t = 130)]
    horizon: usize,
    #[arg(long, value_parser = parse_strategies, default_value = "bs_delta,rs_delta,approx_rs_delta")]
    strategies: StrategyList,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    theta: ThetaArg,
    #[command(flatten)]
    market: MarketArgs,
    /// First business day.
    #[arg(long, default_value = "2016-01-04")]
    start: NaiveDate,
    /// Number of business days.
    #[arg(long, default_value_t = 1)]
    days: usize,
    /// Law of the spot history.
    #[arg(long, default_value = "no-jump")]
    scenario: Scenario,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated tenors; all six when omitted.
    #[arg(long, value_delimiter = ',')]
    tenors: Vec<pegfx::conventions::Tenor>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Surface grid size used for the pricer comparison.
    #[arg(long, default_value_t = pegfx::calibration::SURFACE_POINTS)]
    points: usize,
    /// Hedge evaluations timed per method.
    #[arg(long, default_value_t = 130)]
    evals: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_pool() -> CliResult<()> {
    let Ok(v) = std::env::var("PEGFX_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "PEGFX_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_pool()?;
    match cli.command {
        Command::Price(a) => commands::price(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Surface(a) => commands::surface(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Hedge(a) => commands::hedge(a),
        Command::GenSynthetic(a) => commands::gen_synthetic(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line front end: calibration fits, closed-form bounds, exact chain
//! solutions, simulation and load sweeps, each written as JSON or CSV with a
//! [`RunManifest`] describing how to reproduce it.

mod commands;
mod grid;
mod manifest;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use dynbatch::{BatchLimit, Error};

pub use commands::{BoundsLine, FitLine, SimulateLine, SolveLine, SweepLine, TradeoffLine};
pub use grid::parse_grid;
pub use manifest::{digest, RunManifest, TOOL_VERSION};

pub const SEED_ENV: &str = "DYNBATCH_SEED";

#[derive(Debug, Parser)]
#[command(name = "dynbatch", version, about = "Latency, energy and capacity analysis of dynamic batching")]
pub struct Cli {
    /// Output format; sweep and tradeoff default to csv, the rest to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Base seed for simulation streams.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-squares fit of batch time or batch energy against batch size.
    Fit(FitArgs),
    /// Closed-form latency, utilization and efficiency bounds at one load.
    Bounds(BoundsArgs),
    /// Simulated and/or exact latency across a load grid, next to the bounds.
    Sweep(SweepArgs),
    /// Energy efficiency against latency across a load grid.
    Tradeoff(TradeoffArgs),
    /// Exact stationary solution at one load.
    Solve(SolveArgs),
    /// Replicated simulation at one load.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Service,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sim,
    Chain,
    Both,
}

impl Mode {
    fn sim(self) -> bool {
        matches!(self, Mode::Sim | Mode::Both)
    }

    fn chain(self) -> bool {
        matches!(self, Mode::Chain | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    Deterministic,
    Exponential,
    Gamma,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Measurement CSV, or `-` for stdin.
    pub input: String,
    #[arg(long, value_enum, default_value_t = Target::Service)]
    pub target: Target,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Per-job batch time slope (ms/job).
    #[arg(long)]
    pub alpha: f64,
    /// Per-batch overhead (ms).
    #[arg(long)]
    pub tau0: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LoadArgs {
    /// Arrival rate (jobs/ms).
    #[arg(long, conflicts_with = "rho", required_unless_present = "rho")]
    pub lambda: Option<f64>,
    /// Normalized load; the arrival rate is `rho / alpha`.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnergyArgs {
    /// Per-job batch energy slope (mJ/job).
    #[arg(long, requires = "c0")]
    pub beta: Option<f64>,
    /// Per-batch energy overhead (mJ).
    #[arg(long, requires = "beta")]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimArgs {
    #[arg(long, value_enum, default_value_t = Law::Deterministic)]
    pub law: Law,
    /// Coefficient of variation of the gamma law.
    #[arg(long)]
    pub cv: Option<f64>,
    #[arg(long, default_value_t = dynbatch::sim::DEFAULT_REPLICATIONS)]
    pub replications: u32,
    #[arg(long, default_value_t = dynbatch::sim::DEFAULT_MEASURED_JOBS)]
    pub measured_jobs: u64,
    /// Departures discarded before measuring; defaults to a load-dependent rule.
    #[arg(long)]
    #[serde(serialize_with = "auto_if_none")]
    pub warmup_jobs: Option<u64>,
    #[arg(long, default_value_t = dynbatch::sim::DEFAULT_QUEUE_CAP)]
    pub queue_cap: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChainArgs {
    /// Stationary mass allowed above 90% of the truncation level.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Largest truncation level.
    #[arg(long, default_value_t = 1 << 20)]
    pub ceiling: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub energy: EnergyArgs,
    /// Maximum batch size, or `inf`.
    #[arg(long, default_value = "inf")]
    pub bmax: BatchLimit,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Loads as `a,b,c` or `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub rho_grid: String,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    pub mode: Mode,
    #[arg(long, default_value = "inf")]
    pub bmax: BatchLimit,
    #[command(flatten)]
    #[serde(flatten)]
    pub energy: EnergyArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TradeoffArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub c0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub rho_grid: String,
    #[arg(long, value_enum, default_value_t = Mode::Chain)]
    pub mode: Mode,
    #[arg(long, default_value = "inf")]
    pub bmax: BatchLimit,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub energy: EnergyArgs,
    #[arg(long, default_value = "inf")]
    pub bmax: BatchLimit,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    /// Longest stationary vector included in JSON output.
    #[arg(long, default_value_t = 4096)]
    pub max_vector: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub energy: EnergyArgs,
    #[arg(long, default_value = "inf")]
    pub bmax: BatchLimit,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
}

fn auto_if_none<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(n) => s.serialize_u64(*n),
        None => s.serialize_str("auto"),
    }
}

/// Runs a parsed command and returns the bytes to write to stdout.
pub fn run(cli: &Cli) -> anyhow::Result<Vec<u8>> {
    match &cli.command {
        Command::Fit(a) => commands::fit(a, cli.format.unwrap_or(Format::Json), cli.seed),
        Command::Bounds(a) => commands::bounds(a, cli.format.unwrap_or(Format::Json), cli.seed),
        Command::Sweep(a) => commands::sweep(a, cli.format.unwrap_or(Format::Csv), cli.seed),
        Command::Tradeoff(a) => commands::tradeoff(a, cli.format.unwrap_or(Format::Csv), cli.seed),
        Command::Solve(a) => commands::solve(a, cli.format.unwrap_or(Format::Json), cli.seed),
        Command::Simulate(a) => commands::simulate(a, cli.format.unwrap_or(Format::Json), cli.seed),
    }
}

/// Process exit code for a failed command: 2 for bad input, 3 for an
/// unstable load, 4 for a numerical failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Unstable(_) => 3,
                Error::Truncation { .. } | Error::Solver(_) | Error::Runaway(_) => 4,
                Error::Domain(_) | Error::Ingest { .. } | Error::Fit(_) | Error::UnsupportedLaw(_) => 2,
            };
        }
    }
    2
}

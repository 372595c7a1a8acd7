use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dicke_core::precision::DEFAULT_CAP_BITS;
use dicke_core::Method;

#[derive(Debug, Parser)]
#[command(name = "dicke", version, about = "Population dynamics of collectively decaying emitters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the populations and the emission rate.
    Solve(SolveArgs),
    /// Run several methods on one grid and report their differences.
    Compare(CompareArgs),
    /// Monte Carlo estimate from quantum-jump trajectories.
    Trajectories(TrajectoryArgs),
    /// Burst peak against N, with fitted scaling exponents.
    Scan(ScanArgs),
    /// Wall times per method and the double-precision failure onset.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionChoice {
    Auto,
    Double,
    Fixed,
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Number of emitters N.
    #[arg(long = "n")]
    pub n: usize,
    /// Single-emitter decay rate Γ.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Initial Dicke state m0 (default N, fully inverted).
    #[arg(long)]
    pub initial: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Final time; defaults to (ln N + 12)/(NΓ).
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Defaults to linear below N = 64 and log above.
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// First nonzero time of a log grid; defaults to 1e-3/(NΓ).
    #[arg(long)]
    pub t_min: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PrecisionArgs {
    #[arg(long, value_enum, default_value_t = PrecisionChoice::Auto)]
    pub precision: PrecisionChoice,
    /// Mantissa bits for `--precision fixed`.
    #[arg(long)]
    pub bits: Option<u32>,
    /// Largest mantissa width auto escalation may reach.
    #[arg(long, env = "DICKE_PRECISION_CAP", default_value_t = DEFAULT_CAP_BITS)]
    pub precision_cap: u32,
    /// Defect that auto escalation must reach.
    #[arg(long, default_value_t = dicke_core::precision::DEFAULT_TARGET_TOLERANCE)]
    pub precision_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub series_tol: f64,
    /// Target Γ·h_max·Δt of the discrete-time chain.
    #[arg(long, default_value_t = 1e-3)]
    pub discrete_step: f64,
    #[arg(long, default_value_t = 10_000)]
    pub ntraj: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long = "out", value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Destination file; standard output when absent.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Significant digits in CSV output.
    #[arg(long, default_value_t = 17, value_parser = clap::value_parser!(u8).range(1..=17))]
    pub digits: u8,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = Method::Residue)]
    pub method: Method,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Comma-separated methods, at least two.
    #[arg(long, value_delimiter = ',', default_value = "residue,jordan,ode")]
    pub methods: Vec<Method>,
    /// Largest allowed max-abs difference between exact methods.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 10_000)]
    pub ntraj: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the first K raw trajectory records as JSON instead.
    #[arg(long)]
    pub records: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = Method::Residue)]
    pub method: Method,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long = "out", value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,64,256")]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "residue,ode")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Largest N probed for the double-precision onset and auto recovery.
    #[arg(long, default_value_t = 256)]
    pub max_n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub file: Option<PathBuf>,
}

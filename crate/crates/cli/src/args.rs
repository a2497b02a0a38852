use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "qtf",
    version,
    about = "Quantile trend filtering, TV denoising and simulation studies"
)]
pub struct Cli {
    /// Worker threads for replicate parallelism (default: all cores).
    #[arg(long, global = true, env = "QTF_THREADS")]
    pub threads: Option<usize>,

    /// Suppress progress messages on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a quantile trend filter to a signal file.
    Fit(FitArgs),
    /// Quantile TV denoising of a 2-d grid (or a `shape:` lattice file).
    Denoise2d(DenoiseArgs),
    /// Run a Monte Carlo experiment and write CSV and JSON reports.
    Simulate(SimulateArgs),
    /// Estimate the empirical risk rate over several sample sizes.
    Rate(RateArgs),
    /// Solve a small instance exactly with the simplex method.
    Oracle(OracleArgs),
    /// Choose the penalty of a fit by BIC over a grid.
    Tune(TuneArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Ipm,
    Admm,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Solver backend.
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    /// Stopping tolerance.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Iteration cap of the solver.
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Signal file: one value per line.
    pub input: PathBuf,
    /// Quantile level in (0, 1).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Difference order r.
    #[arg(long)]
    pub order: Option<usize>,
    /// Penalty on TV^(r).
    #[arg(long, allow_negative_numbers = true, conflicts_with = "budget")]
    pub lambda: Option<f64>,
    /// Budget V on TV^(r).
    #[arg(long, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Grid file: comma or whitespace separated rows.
    pub input: PathBuf,
    /// Quantile level in (0, 1).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Penalty on the lattice TV.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "budget")]
    pub lambda: Option<f64>,
    /// Budget on the lattice TV.
    #[arg(long, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output grid file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Lower end of the log10 parameter grid.
    #[arg(long, allow_negative_numbers = true)]
    pub grid_lo: Option<f64>,
    /// Upper end of the log10 parameter grid.
    #[arg(long, allow_negative_numbers = true)]
    pub grid_hi: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Scenario 1 to 6.
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Quantile level in (0, 1).
    #[arg(long)]
    pub tau: Option<f64>,
    /// pqtf1, pqtf2, cqtf, qtvd or l1qr.
    #[arg(long)]
    pub method: Option<String>,
    /// Difference order for cqtf.
    #[arg(long)]
    pub order: Option<usize>,
    /// oracle-grid, bic or fixed.
    #[arg(long)]
    pub tuning: Option<String>,
    /// Parameter for fixed tuning.
    #[arg(long, allow_negative_numbers = true)]
    pub value: Option<f64>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Base seed; replicate k uses stream k.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Design columns for l1qr.
    #[arg(long)]
    pub columns: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Sample size (lattice nodes for qtvd).
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the CSV and JSON reports.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    /// cos(6 pi i / n) with Cauchy noise (scenario 5).
    Sinusoid,
    /// Two-knot step function with normal noise (scenario 1).
    Steps,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Fit synthetic risks 0.5 n^(-2/3) instead of running experiments.
    #[arg(long)]
    pub self_test: bool,
    /// Preset truth; overrides the scenario.
    #[arg(long, value_enum, conflicts_with = "scenario")]
    pub truth: Option<TruthArg>,
    /// Comma-separated increasing sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// JSON rate config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Signal file: one value per line.
    pub input: PathBuf,
    /// Quantile level in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Difference order r.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Penalty on TV^(r).
    #[arg(
        long,
        allow_negative_numbers = true,
        conflicts_with = "budget",
        required_unless_present = "budget"
    )]
    pub lambda: Option<f64>,
    /// Budget V on TV^(r).
    #[arg(long, allow_negative_numbers = true)]
    pub budget: Option<f64>,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Signal file: one value per line.
    pub input: PathBuf,
    /// Quantile level in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Difference order r.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pepscan_core::limit::{BoundConvention, ErrorMode};

#[derive(Debug, Parser)]
#[command(name = "pepscan", version, about = "Pauli-exclusion-violation search toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Shared TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; required by stochastic subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true, env = "PEPSCAN_OUTPUT_DIR", default_value = ".")]
    pub output_dir: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides `analysis.error_mode`.
    #[arg(long, global = true, value_enum)]
    pub error_mode: Option<ErrorModeArg>,
    /// Overrides `analysis.bound_convention`.
    #[arg(long, global = true, value_enum)]
    pub bound_convention: Option<BoundConventionArg>,
    /// Overrides `analysis.n_sigma`.
    #[arg(long, global = true)]
    pub nsigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ErrorModeArg {
    PaperNaive,
    Propagated,
}

impl From<ErrorModeArg> for ErrorMode {
    fn from(a: ErrorModeArg) -> Self {
        match a {
            ErrorModeArg::PaperNaive => ErrorMode::PaperNaive,
            ErrorModeArg::Propagated => ErrorMode::Propagated,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundConventionArg {
    Paper,
    CentralPlusNsigma,
}

impl From<BoundConventionArg> for BoundConvention {
    fn from(a: BoundConventionArg) -> Self {
        match a {
            BoundConventionArg::Paper => BoundConvention::Paper,
            BoundConventionArg::CentralPlusNsigma => BoundConvention::CentralPlusNsigma,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a current-on/current-off campaign into two run files.
    Simulate(SimulateArgs),
    /// Monte Carlo detection efficiency for the configured geometry.
    Efficiency(EfficiencyArgs),
    /// Energy calibration of one run file from its Ti/Mn peaks.
    Calibrate(CalibrateArgs),
    /// ROI counts and excess for a current-on/current-off pair.
    Analyze(AnalyzeArgs),
    /// Upper limit on beta^2/2 from an analysis result.
    Limit(LimitArgs),
    /// Exposure needed to reach a target limit.
    Project(ProjectArgs),
    /// Recompute the published limit and check it.
    ReproducePaper,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Injected beta^2/2, overriding the config's injection section.
    #[arg(long)]
    pub inject: Option<f64>,
    #[arg(long)]
    pub on_days: Option<f64>,
    #[arg(long)]
    pub off_days: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EfficiencyArgs {
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Run file to calibrate.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub on: PathBuf,
    #[arg(long)]
    pub off: PathBuf,
    /// Energy scale from a `calibrate` result instead of per-run calibration.
    #[arg(long, conflicts_with = "nominal_scale")]
    pub calibration: Option<PathBuf>,
    /// Use the response model's nominal scale instead of per-run calibration.
    #[arg(long)]
    pub nominal_scale: bool,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// `analysis.toml` written by `analyze`.
    #[arg(long)]
    pub analysis: PathBuf,
    /// Use the efficiency from an `efficiency` result instead of the config value.
    #[arg(long)]
    pub efficiency: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Start from an analysis result instead of the published inputs.
    #[arg(long)]
    pub analysis: Option<PathBuf>,
    /// Target beta^2/2, overriding `projection.target`.
    #[arg(long)]
    pub target: Option<f64>,
}

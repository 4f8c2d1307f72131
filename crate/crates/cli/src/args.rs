use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cqr", version, about = "Convex quantile and expectile regression with L1 and L0 variable selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator and write its result document.
    Fit(FitArgs),
    /// Choose the penalty parameters by k-fold cross-validation.
    Tune(TuneArgs),
    /// Run the Monte Carlo study and write long-format metrics.
    Simulate(SimulateArgs),
    /// Write the model a fit would solve in MPS format.
    Export(ExportArgs),
    /// Re-check the invariants of a result document.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Output column (default: the last column).
    #[arg(long)]
    pub output_col: Option<String>,
    /// Column holding observation ids.
    #[arg(long)]
    pub id_col: Option<String>,
    /// Input columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub inputs: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Quantile,
    Expectile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    CuttingPlane,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Mst,
    SpanningPath,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "quantile")]
    pub family: FamilyArg,
    /// τ for quantiles, τ̃ for expectiles.
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    #[arg(long, value_enum, default_value = "cutting-plane")]
    pub mode: ModeArg,
    /// Starting pairs of the cutting-plane loop.
    #[arg(long, value_enum, default_value = "mst")]
    pub init: InitArg,
    /// Largest Afriat violation the cutting-plane loop accepts.
    #[arg(long, default_value_t = 0.01)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    None,
    L1,
    L0,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    #[arg(long, value_enum, default_value = "none")]
    pub penalty: PenaltyArg,
    /// L1 weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// L0 cardinality bound.
    #[arg(long)]
    pub k: Option<usize>,
    /// Big-M as a multiple of the largest unpenalized slope.
    #[arg(long, conflicts_with = "big_m")]
    pub m_mult: Option<f64>,
    /// Big-M as an absolute value.
    #[arg(long)]
    pub big_m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Result document path; the document goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// MPS file path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Default,
    Sdg,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub cv_seed: u64,
    /// Base grids; explicit grid flags override single grids.
    #[arg(long, value_enum, default_value = "default")]
    pub preset: PresetArg,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub m_mults: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "l0")]
    pub penalty: PenaltyArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExponentArg {
    KTrue,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500])]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [6, 8, 10, 12])]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4])]
    pub k_true: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0, 10.0])]
    pub rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// e.g. `l0-cqr,l1-cqr,l0-cer,l1-cer`.
    #[arg(long, value_delimiter = ',', default_value = "l0-cqr,l1-cqr,l0-cer,l1-cer")]
    pub methods: Vec<String>,
    #[arg(long, value_enum, default_value = "k-true")]
    pub exponent: ExponentArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Result document written by `fit`.
    pub document: PathBuf,
}

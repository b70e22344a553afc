use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tsauc::experiments::ReductionMode;

#[derive(Debug, Parser)]
#[command(name = "tsauc", version, about = "Two-sample testing of posturographic features with ts-AUC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the 17 sway features from a directory of trajectory CSVs.
    Extract(ExtractArgs),
    /// Run ts-AUC, MMD and univariate MWW tests on a feature matrix.
    Test(TestArgs),
    /// Permutation importance and model-size selection for the best forest.
    Importance(ImportanceArgs),
    /// Population-reduction experiment comparing every method.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory holding one `t,x,y` CSV per recording.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// CSV with columns `subject_id,label` (1 = faller).
    #[arg(long)]
    pub labels: PathBuf,
    /// Output feature-matrix CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Resampling rate in Hz.
    #[arg(long, default_value_t = 25.0)]
    pub rate_hz: f64,
}

/// Flags shared by every command that runs ts-AUC.
#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Trees per forest.
    #[arg(long, default_value_t = 200)]
    pub trees: usize,
    /// Smallest minimum-leaf-size in the grid.
    #[arg(long, default_value_t = 8)]
    pub ls_min: usize,
    /// Largest minimum-leaf-size in the grid.
    #[arg(long, default_value_t = 19)]
    pub ls_max: usize,
    /// Largest features-per-tree in the grid.
    #[arg(long, default_value_t = 8)]
    pub m_max: usize,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Feature-matrix CSV.
    pub matrix: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// MMD label permutations.
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    /// Forests per model size during selection.
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    pub matrix: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bar-chart CSV; defaults to the report path with a `.csv` extension.
    #[arg(long)]
    pub bars: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub matrix: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    /// `uniform` or `nonfaller-only`.
    #[arg(long, default_value = "uniform")]
    pub mode: ReductionMode,
    #[arg(long, default_value_t = 12)]
    pub repeats: usize,
    /// Retained fractions, strictly decreasing (default 0.95 down to 0.35).
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Output directory for report.json, repeats.csv and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "coldpack", version, about = "Package recommender for short-lived booking offers")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with its ground truth.
    Gen(GenArgs),
    /// Summarize and validate a dataset.
    Profile(ProfileArgs),
    /// Fit all model components up to a training date.
    Train(TrainArgs),
    /// Hill-climb fusion weights on a validation window.
    Tune(TuneArgs),
    /// Top-n packages for one user and target window.
    Recommend(RecommendArgs),
    /// Run the offline experiment and write the EMP report.
    Eval(EvalArgs),
    /// Fit the per-course price regression and plot predictions.
    PriceReport(PriceReportArgs),
    /// Show how the reference course and package were chosen.
    ExplainRef(ExplainRefArgs),
    /// gen, train, tune, eval and report in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of user clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Candidate courses kept after co-occurrence filtering.
    #[arg(long)]
    pub top_m: Option<usize>,
    /// Currency scaling of the price similarity, in minor units.
    #[arg(long)]
    pub omega: Option<f64>,
    /// L2 penalty of the option models.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Initial hill-climbing step.
    #[arg(long)]
    pub step: Option<f64>,
    /// List length optimized by weight tuning.
    #[arg(long = "n")]
    pub tune_n: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WindowArgs {
    /// Last training day; the test window starts the day after.
    #[arg(long)]
    pub cutoff: Option<NaiveDate>,
    /// Test window length in days.
    #[arg(long)]
    pub horizon: Option<i64>,
    /// Comma-separated settings or `all`.
    #[arg(long)]
    pub settings: Option<String>,
    /// Longest list length scored.
    #[arg(long = "N")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenShape {
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub courses: Option<usize>,
    #[arg(long)]
    pub months: Option<u32>,
    /// Comma-separated archetype proportions.
    #[arg(long)]
    pub cluster_mix: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub shape: GenShape,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Write the profile JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training date; defaults to the configured cutoff.
    #[arg(long)]
    pub as_of: Option<NaiveDate>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Validation manifest; defaults to the one written by `train`.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub settings: Option<String>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset; defaults to the one the model was trained on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub user: u32,
    /// Target window as `start:end`.
    #[arg(long)]
    pub window: String,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value = "full_with_r")]
    pub setting: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score with uniform weights instead of tuning first.
    #[arg(long)]
    pub no_tune: bool,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct PriceReportArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Course id; defaults to the course with the most packages.
    #[arg(long)]
    pub course: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainRefArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub user: u32,
    /// First day of the target window.
    #[arg(long)]
    pub date: NaiveDate,
    /// Last day of usable history; defaults to the day before `date`.
    #[arg(long)]
    pub as_of: Option<NaiveDate>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_tune: bool,
    #[command(flatten)]
    pub shape: GenShape,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vapcast::preprocess::ScalingMode;

/// Sentinel path meaning "use the table shipped with the binary".
pub const BUNDLED: &str = "bundled";
/// Sentinel path meaning "not given".
pub const NONE: &str = "none";

#[derive(Debug, Parser)]
#[command(name = "vapcast", version, about = "VAP risk modelling for TBI cohorts")]
pub struct Cli {
    /// Worker threads for CV, grid and bootstrap work (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic cohort from summary statistics
    Synth(SynthArgs),
    /// Apply the VAP diagnostic rule to an evidence CSV
    Label(LabelArgs),
    /// Impute, encode, prune, select and scale a dataset
    Prep(PrepArgs),
    /// Balance classes with SMOTE
    Resample(ResampleArgs),
    /// Fit one classifier and save it as JSON
    Train(TrainArgs),
    /// Cross-validated grid search
    Tune(TuneArgs),
    /// Score a saved model on labeled data
    Evaluate(EvaluateArgs),
    /// Stepwise backward feature elimination
    Ablate(AblateArgs),
    /// TreeSHAP attributions for a tree model
    Explain(ExplainArgs),
    /// Train/test comparison table with p-values
    CohortStats(CohortStatsArgs),
    /// Run the whole pipeline end to end
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// Master seed
    #[arg(long, env = "VAPCAST_SEED", default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV (optional `label` column)
    #[arg(long)]
    pub data: PathBuf,
    /// Feature schema JSON; inferred from the CSV when `none`
    #[arg(long, default_value = NONE)]
    pub schema: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Cohort statistics JSON
    #[arg(long, default_value = BUNDLED)]
    pub stats: String,
    /// Label signal JSON
    #[arg(long, default_value = BUNDLED)]
    pub signal: String,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the train/test split as JSON
    #[arg(long, default_value = NONE)]
    pub split_out: String,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Evidence CSV
    #[arg(long)]
    pub evidence: PathBuf,
    /// Output CSV with vap,rc,sc,pc columns
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Split JSON; preprocessing is fitted on its training rows only
    #[arg(long, default_value = NONE)]
    pub split: String,
    /// Scaling applied after selection
    #[arg(long, value_enum, default_value_t = ScalingArg::Minmax)]
    pub mode: ScalingArg,
    /// Drop the later column of any pair with |r| at or above this
    #[arg(long, default_value_t = 0.9)]
    pub corr_threshold: f64,
    /// Keep this many features by boosted-tree gain (0 keeps all)
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Transformed CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Selection report JSON
    #[arg(long, default_value = "selection_report.json")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Nearest minority neighbours
    #[arg(long, default_value_t = 5)]
    pub k_neighbors: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output CSV (synthetic rows appended)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    /// Classifier family
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(vapcast::learners::MODEL_NAMES), default_value = "gbt")]
    pub model: String,
    /// Hyperparameter JSON object (missing keys take defaults)
    #[arg(long, default_value = NONE)]
    pub params: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Oversample the minority class before fitting [default: off]
    #[arg(long, default_value_t = false)]
    pub smote: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Model JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Grid JSON
    #[arg(long, default_value = BUNDLED)]
    pub grid: String,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// SMOTE neighbours inside training folds
    #[arg(long, default_value_t = 5)]
    pub k_neighbors: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Leaderboard JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model JSON
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
    /// Probability cut-off for threshold metrics
    #[arg(long, default_value_t = vapcast::evaluate::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Bootstrap replicates for confidence intervals
    #[arg(long, default_value_t = vapcast::evaluate::DEFAULT_BOOTSTRAP_REPLICATES)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Metrics JSON
    #[arg(long)]
    pub out: PathBuf,
    /// ROC CSV (threshold,fpr,tpr)
    #[arg(long, default_value = NONE)]
    pub roc: String,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Score on this held-out CSV instead of cross-validation
    #[arg(long, default_value = NONE)]
    pub ablate_on_test: String,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// SMOTE neighbours
    #[arg(long, default_value_t = 5)]
    pub k_neighbors: usize,
    /// Bootstrap replicates for held-out intervals
    #[arg(long, default_value_t = vapcast::evaluate::DEFAULT_BOOTSTRAP_REPLICATES)]
    pub bootstrap: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Trace JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Model JSON (gbt or rf)
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
    /// Directory for shap.csv, shap_rank.json and shap_summary.svg
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CohortStatsArgs {
    /// Training CSV
    #[arg(long)]
    pub train: PathBuf,
    /// Test CSV
    #[arg(long)]
    pub test: PathBuf,
    /// Feature schema JSON; inferred from the training CSV when `none`
    #[arg(long, default_value = NONE)]
    pub schema: String,
    /// Welch instead of pooled t-tests [default: off]
    #[arg(long, default_value_t = false)]
    pub welch: bool,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// JSON run configuration; flags given explicitly override it
    #[arg(long, default_value = NONE)]
    pub config: String,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output directory
    #[arg(long, default_value = "vapcast_out")]
    pub out_dir: PathBuf,
    /// Cohort statistics JSON
    #[arg(long, default_value = BUNDLED)]
    pub stats: String,
    /// Label signal JSON
    #[arg(long, default_value = BUNDLED)]
    pub signal: String,
    /// Training share of the cohort
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// SMOTE neighbours
    #[arg(long, default_value_t = 5)]
    pub k_neighbors: usize,
    /// Grid JSON for tuning the boosted model; `none` keeps the fixed parameters
    #[arg(long, default_value = NONE)]
    pub grid: String,
    /// Probability cut-off for threshold metrics
    #[arg(long, default_value_t = vapcast::evaluate::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Bootstrap replicates for confidence intervals
    #[arg(long, default_value_t = vapcast::evaluate::DEFAULT_BOOTSTRAP_REPLICATES)]
    pub bootstrap: usize,
    /// Run ablation on the test split instead of training-split CV [default: off]
    #[arg(long, default_value_t = false)]
    pub ablate_on_test: bool,
    /// Welch instead of pooled t-tests in the cohort table [default: off]
    #[arg(long, default_value_t = false)]
    pub welch: bool,
    /// Correlation pruning threshold
    #[arg(long, default_value_t = 0.9)]
    pub corr_threshold: f64,
    /// Features kept by gain ranking
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
    /// Stages to leave out
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none")]
    pub skip: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    None,
    Baselines,
    Ablate,
    Explain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Minmax,
    Standard,
    None,
}

impl From<ScalingArg> for ScalingMode {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Minmax => ScalingMode::MinMax,
            ScalingArg::Standard => ScalingMode::Standard,
            ScalingArg::None => ScalingMode::None,
        }
    }
}

/// `Some(path)` unless the value is the `none` sentinel.
pub fn optional_path(s: &str) -> Option<PathBuf> {
    (s != NONE).then(|| PathBuf::from(s))
}

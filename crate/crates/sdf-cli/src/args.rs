//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "sdf",
    about = "Siamese Deep Forest: pairwise similarity learning with forest cascades",
    version
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Root seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// JSON config file with cascade / scanning / solver settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled pair set from a samples CSV.
    Pairs(PairsArgs),
    /// Train a cascade on a samples CSV plus a pair CSV.
    Train(TrainArgs),
    /// Classify pairs with a trained model.
    Predict(PredictArgs),
    /// Repetition-averaged accuracy tables (weighted vs uniform baseline).
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    /// Samples CSV.
    #[arg(long)]
    pub input: PathBuf,

    /// Label column: zero-based index or "last".
    #[arg(long, default_value = "last")]
    pub label_col: String,

    /// Treat the first CSV row as a header.
    #[arg(long)]
    pub has_header: bool,

    /// Number of pairs to generate.
    #[arg(long)]
    pub n: usize,

    /// Fraction of similar pairs.
    #[arg(long, default_value_t = 0.5)]
    pub balance: f64,

    /// Output pair CSV (header i,j,y).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Samples CSV.
    #[arg(long)]
    pub samples: PathBuf,

    /// Pair CSV (header i,j,y).
    #[arg(long)]
    pub pairs: PathBuf,

    /// Label column: zero-based index or "last".
    #[arg(long, default_value = "last")]
    pub label_col: String,

    /// Treat the first CSV row as a header.
    #[arg(long)]
    pub has_header: bool,

    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,

    /// Keep uniform tree weights and skip the weight solve.
    #[arg(long)]
    pub baseline: bool,

    /// Training log path (default: model path with .log extension).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Samples CSV.
    #[arg(long)]
    pub samples: PathBuf,

    /// Pair CSV of (i, j) rows to classify (y column ignored).
    #[arg(long)]
    pub pairs: PathBuf,

    /// Label column: zero-based index or "last".
    #[arg(long, default_value = "last")]
    pub label_col: String,

    /// Treat the first CSV row as a header.
    #[arg(long)]
    pub has_header: bool,

    /// Decision threshold.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,

    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,

    /// Label column: zero-based index or "last".
    #[arg(long, default_value = "last")]
    pub label_col: String,

    /// Treat the first CSV row as a header.
    #[arg(long)]
    pub has_header: bool,

    /// Trees per forest, comma separated.
    #[arg(long, default_value = "100", value_delimiter = ',')]
    pub t: Vec<usize>,

    /// Training pair counts, comma separated.
    #[arg(long, default_value = "100", value_delimiter = ',')]
    pub n: Vec<usize>,

    /// Repetitions per cell.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,

    /// Regularization values to tune over, comma separated.
    #[arg(long, default_value = "0.01", value_delimiter = ',')]
    pub lambdas: Vec<f64>,

    /// Which models to run.
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,

    /// Fraction of similar pairs when sampling.
    #[arg(long, default_value_t = 0.5)]
    pub balance: f64,

    /// Decision threshold used for accuracy.
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,

    /// Machine-readable report path (canonical JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Gcf,
    Sdf,
    Both,
}

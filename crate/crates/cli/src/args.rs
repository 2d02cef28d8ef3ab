use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Environment variable naming the default benchmark data directory.
pub const DATA_DIR_ENV: &str = "JOINTSCL_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "jointscl", version, about = "Joint neural SCL experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Key-value config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log verbosity (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the n-gram vocabulary over the source and target corpora.
    Vocab(VocabArgs),
    /// Select pivot features.
    Pivots(PivotsArgs),
    /// Compare two pivot files by term.
    Overlap(OverlapArgs),
    /// Train one system and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on labeled target reviews.
    Eval(EvalArgs),
    /// Run the all-pairs, multi-seed benchmark and write result tables.
    Benchmark(BenchmarkArgs),
    /// Write a two-domain synthetic corpus in the processed layout.
    Synth(SynthArgs),
    /// Run the built-in property checks.
    Selfcheck(SelfcheckArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Labeled source reviews (processed format, or TSV if the name ends in `.tsv`).
    #[arg(long)]
    pub source: PathBuf,
    /// Extra unlabeled source reviews.
    #[arg(long)]
    pub source_unlabeled: Option<PathBuf>,
    /// Unlabeled target reviews; labels in the file are ignored.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value = "source")]
    pub source_domain: String,
    #[arg(long, default_value = "target")]
    pub target_domain: String,
    /// Minimum document frequency over all input text.
    #[arg(long, default_value_t = 5)]
    pub min_df: u32,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PivotArgs {
    /// mi, oracle, frequency or random.
    #[arg(long, default_value = "mi")]
    pub strategy: String,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    /// Minimum document frequency in each domain for a pivot candidate.
    #[arg(long, default_value_t = 10)]
    pub candidate_min_df: u32,
    /// Labeled target reviews, read only by the oracle strategy.
    #[arg(long)]
    pub target_labeled: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PivotsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pivot: PivotArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Joint model hidden size.
    #[arg(long, default_value_t = 2000)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    /// Zero the pivot columns of the joint model's input.
    #[arg(long)]
    pub mask_pivots: bool,
    /// Add bias terms to the joint model.
    #[arg(long)]
    pub use_bias: bool,
    /// AE-SCL hidden size.
    #[arg(long, default_value_t = 100)]
    pub aescl_hidden: usize,
    /// Rank of the SCL projection.
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    #[arg(long, default_value_t = 1600)]
    pub train_size: usize,
    #[arg(long, default_value_t = 400)]
    pub validation_size: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// joint, aescl, classic_scl or logreg.
    #[arg(long, default_value = "joint")]
    pub system: String,
    /// Pivot file to use instead of selecting pivots.
    #[arg(long)]
    pub pivots: Option<PathBuf>,
    #[command(flatten)]
    pub pivot: PivotArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled target reviews.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value = "target")]
    pub target_domain: String,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory holding `<domain>/{positive,negative,unlabeled}.review`.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "books,dvd,electronics,kitchen")]
    pub domains: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "logreg,aescl,joint_mi,joint_oracle")]
    pub systems: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// First seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// System the Welch tests compare against.
    #[arg(long, default_value = "aescl")]
    pub baseline: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Split every seed's source data with the first seed.
    #[arg(long)]
    pub freeze_split: bool,
    #[arg(long, default_value_t = 5)]
    pub min_df: u32,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub candidate_min_df: u32,
    /// Also write the MI pivot overlap between the two named domains.
    #[arg(long, value_delimiter = ',')]
    pub overlap: Vec<String>,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_delimiter = ',', default_value = "alpha,beta")]
    pub domains: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub labeled: usize,
    #[arg(long, default_value_t = 2000)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Random gradient-check instances.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

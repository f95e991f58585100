use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gdr", version, about = "Guided repair of CFD violations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply high-scoring suggestions without a user and write the result.
    Repair(RepairArgs),
    /// Replay sessions against a clean instance with a simulated user.
    Simulate(SimulateArgs),
    /// Print the ranked update groups of a dirty instance.
    Rank(RankArgs),
    /// Write a copy of a clean instance with injected errors.
    Inject(InjectArgs),
    /// Serve one live session over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Input {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub rules: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Tuning {
    /// Answers per batch before retraining.
    #[arg(long, default_value_t = 5)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score threshold of the `auto` strategy.
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    #[arg(long, default_value_t = 3)]
    pub k_reveal: usize,
    /// Training examples an attribute needs before its model is used.
    #[arg(long, default_value_t = 10)]
    pub min_examples: usize,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Repaired CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// A strategy name or `all`.
    #[arg(long, default_value = "gdr")]
    pub strategy: String,
    /// User answers allowed: a count, or a percentage of the initial dirty
    /// tuples such as `50%`.
    #[arg(long)]
    pub budget: Option<String>,
    /// Seed range such as `1..5` (inclusive) or a comma list; overrides
    /// `--seed`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub tuning: Tuning,
    /// JSON report path; the curve CSV goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave the per-event log out of the report.
    #[arg(long)]
    pub no_events: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub input: Input,
    /// Show only the first N groups.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    /// Clean CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Fraction of tuples to perturb.
    #[arg(long, default_value_t = 0.3)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub input: Input,
    /// Clean instance; enables loss and improvement in the metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "gdr")]
    pub strategy: String,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "phnmf", version, about = "Population-based hierarchical NMF experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a known three-level hierarchy.
    Synth(SynthArgs),
    /// Build a population tree with hard splits and a similarity stopping rule.
    Phnmf(PhnmfArgs),
    /// Build a top-down topic tree with soft splits and a minimum topic size.
    Hnmf(HnmfArgs),
    /// Score candidate ranks by feature similarity and pick the best.
    Rank(RankArgs),
    /// Clustering accuracy of PHNMF over synthetic replicates.
    Accuracy(AccuracyArgs),
    /// Subgroup versus population regression coefficients on synthetic data.
    Regression(RegressionArgs),
    /// Encode a survey CSV into a non-negative model matrix.
    Ingest(IngestArgs),
    /// Re-run the command recorded in a manifest and compare artifact hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Continuous,
    Categorical,
}

impl From<Kind> for phnmf::synthgen::DataKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Continuous => Self::Continuous,
            Kind::Categorical => Self::Categorical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "continuous")]
    pub kind: Kind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows per group.
    #[arg(long, default_value_t = 200)]
    pub rows_per_group: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Assignment threshold and rank options shared by the tree builders.
#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Absolute assignment threshold on W coefficients.
    #[arg(long, conflicts_with = "relative_alpha")]
    pub alpha: Option<f64>,
    /// Threshold as a fraction of each W column's maximum.
    #[arg(long, default_value_t = 0.05)]
    pub relative_alpha: f64,
    /// Fixed rank per node.
    #[arg(long, conflicts_with = "auto_rank")]
    pub rank: Option<usize>,
    /// Select the rank per node by feature similarity (default when --rank is absent).
    #[arg(long)]
    pub auto_rank: bool,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_K_MIN)]
    pub k_min: usize,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = phnmf::hierarchy::DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
}

#[derive(Debug, Args)]
pub struct PhnmfArgs {
    /// Matrix as CSV or binary.
    #[arg(long)]
    pub input: PathBuf,
    /// One feature name per line, used in the tree JSON.
    #[arg(long)]
    pub feature_names: Option<PathBuf>,
    #[arg(long, default_value_t = phnmf::hierarchy::DEFAULT_BETA)]
    pub beta: f64,
    /// NMF runs per similarity evaluation.
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_N_SEEDS)]
    pub seeds: usize,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct HnmfArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub feature_names: Option<PathBuf>,
    /// Minimum number of rows for a topic to be split further.
    #[arg(long)]
    pub min_docs: usize,
    /// NMF runs per rank evaluation with --auto-rank.
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_N_SEEDS)]
    pub seeds: usize,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_K_MIN)]
    pub k_min: usize,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_N_SEEDS)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Precision,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AccuracyArgs {
    #[arg(long, value_enum, default_value = "continuous")]
    pub kind: Kind,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = phnmf::hierarchy::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_N_SEEDS)]
    pub seeds: usize,
    /// Per-node rank selection instead of rank 2 at every level.
    #[arg(long)]
    pub auto_rank: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegressionArgs {
    #[arg(long, value_enum, default_value = "continuous")]
    pub kind: Kind,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = phnmf::hierarchy::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = phnmf::model_select::DEFAULT_N_SEEDS)]
    pub seeds: usize,
    #[arg(long)]
    pub auto_rank: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Seed for the text topic factorizations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the re-run; defaults to a `replay` directory beside the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<phnmf::Error>() {
            if e.is_validation() {
                return 2;
            }
            if e.is_io() {
                return 3;
            }
            return 1;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("PHNMF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| phnmf::Error::Validation(format!("PHNMF_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| commands::run(cli, &argv));
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

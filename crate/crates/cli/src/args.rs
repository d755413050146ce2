//! Command-line grammar. Every option here overrides the matching config-file field.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gradrank_core::losses::LossKind;
use gradrank_core::metrics::Gain;
use gradrank_datagen::Mode;

#[derive(Debug, Parser)]
#[command(name = "gradrank", version, about = "Graded-relevance retrieval training and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON config file; command-line flags win over its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug, -vvv trace). Logs go to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate graded ranking contexts for a query list through a chat-completion endpoint.
    Generate(GenerateArgs),
    /// Train the encoder on ranking contexts.
    Train(TrainArgs),
    /// Rank a corpus with trained parameters and compute retrieval metrics.
    Eval(EvalArgs),
    /// Summarise similarity scores per relevance grade.
    Analyze(AnalyzeArgs),
    /// Binarise contexts, or merge real judged passages into them.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GainArg {
    Exp,
    Linear,
}

impl From<GainArg> for Gain {
    fn from(g: GainArg) -> Self {
        match g {
            GainArg::Exp => Gain::Exponential,
            GainArg::Linear => Gain::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Multilevel,
    Binary,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Multilevel => Mode::Multilevel,
            ModeArg::Binary => Mode::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Ndcg,
    Mrr,
    Recall,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::from_str(s).map_err(|_| {
        let names: Vec<&str> = LossKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown loss {s:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Queries as `id<TAB>text`.
    #[arg(long, value_name = "PATH")]
    pub queries: Option<PathBuf>,
    /// In-context example pool (context JSONL); defaults to the bundled pool.
    #[arg(long, value_name = "PATH")]
    pub pool: Option<PathBuf>,
    /// Output context JSONL. Existing lines are kept and their queries skipped.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Failure log; defaults to `<output>.failures.jsonl`.
    #[arg(long, value_name = "PATH")]
    pub failures: Option<PathBuf>,
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_name = "N")]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_name = "N")]
    pub max_tokens: Option<u32>,
    /// Largest tolerated fraction of failed queries before exiting with status 3.
    #[arg(long, value_name = "FRACTION")]
    pub max_failure_rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training contexts (context JSONL).
    #[arg(long, value_name = "PATH")]
    pub contexts: Option<PathBuf>,
    /// Output directory for `params.bin`, `history.jsonl` and `config.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_loss, value_name = "NAME")]
    pub loss: Option<LossKind>,
    /// Map grades 3 and 2 to 1 and the rest to 0 before training.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true", value_name = "BOOL")]
    pub binarize: Option<bool>,
    /// Add the other contexts' passages of a batch as grade-0 candidates.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true", value_name = "BOOL")]
    pub in_batch_expansion: Option<bool>,
    #[arg(long = "lr", value_name = "RATE")]
    pub learning_rate: Option<f64>,
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "FRACTION")]
    pub warmup_ratio: Option<f64>,
    #[arg(long, value_name = "N")]
    pub grad_accumulation: Option<usize>,
    /// Feature hash width in bits.
    #[arg(long, value_name = "BITS")]
    pub bucket_bits: Option<u32>,
    /// Embedding dimension.
    #[arg(long, value_name = "N")]
    pub dim: Option<usize>,
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true", value_name = "BOOL")]
    pub bias: Option<bool>,
    /// Real judgments (`qid 0 docid grade`) to merge into matching contexts.
    #[arg(long, value_name = "PATH")]
    pub real_qrels: Option<PathBuf>,
    /// Corpus (`id<TAB>text`) holding the passages named by `--real-qrels`.
    #[arg(long, value_name = "PATH")]
    pub real_corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Parameter file written by `train`.
    #[arg(long, value_name = "PATH")]
    pub params: Option<PathBuf>,
    /// Queries as `id<TAB>text`.
    #[arg(long, value_name = "PATH")]
    pub queries: Option<PathBuf>,
    /// Corpus as `id<TAB>text`.
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Judgments as `qid 0 docid grade`.
    #[arg(long, value_name = "PATH")]
    pub qrels: Option<PathBuf>,
    /// Output directory for `run.trec` and `report.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Metrics to compute.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metrics: Option<Vec<MetricArg>>,
    /// Cutoffs, comma separated or repeated.
    #[arg(long, value_delimiter = ',', value_name = "N")]
    pub k: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub gain: Option<GainArg>,
    /// Minimum grade counted as relevant by MRR and Recall.
    #[arg(long, value_name = "N")]
    pub threshold: Option<u32>,
    /// Drop grade-1 judgments before evaluating.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true", value_name = "BOOL")]
    pub strict: Option<bool>,
    /// Entries per query written to the run file.
    #[arg(long, value_name = "N")]
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    pub params: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub contexts: Option<PathBuf>,
    /// Output directory for `levels.json` and `histograms.txt`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_name = "N")]
    pub bins: Option<usize>,
    /// Widest histogram bar in characters.
    #[arg(long, value_name = "N")]
    pub width: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    /// Input contexts (context JSONL).
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Write a binarised copy.
    #[arg(long)]
    pub binarize: bool,
    /// Merge real passages: judged grade ≥ 1 become grade 3, judged grade 0 become grade 1.
    #[arg(long, value_name = "PATH")]
    pub real_qrels: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub real_corpus: Option<PathBuf>,
}

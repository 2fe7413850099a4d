mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use litref_core::pipeline::{with_threads, PipelineConfig, RecipeKind};
use litref_core::{Error, ExportFormat, HighSubcategory, SimilarityBin};

#[derive(Debug, Parser)]
#[command(name = "litref", version, about = "Build and evaluate multi-reference translation datasets")]
struct Cli {
    /// Worker threads for parallel stages. Output does not depend on it.
    #[arg(long, global = true, env = "LITREF_THREADS")]
    threads: Option<usize>,

    /// TOML config supplying defaults; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus, apply the word limit and write it back normalized.
    Ingest(IngestArgs),
    /// Compute sim_p for every multi-reference group.
    Score(ScoreArgs),
    /// Re-bin a scored file under new thresholds.
    Bin(BinArgs),
    /// Build one training dataset from a corpus and its scores.
    Build(BuildArgs),
    /// Book-disjoint train/val/test split.
    Split(SplitArgs),
    /// Convert a dataset to a training file format.
    Export(ExportArgs),
    /// Score hypotheses against reference groups.
    Eval(EvalArgs),
    /// Paired bootstrap significance against a baseline.
    Sigtest(SigtestArgs),
    /// Composition, histogram, gain and corpus statistics reports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Run every stage from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Drop groups with any reference of this many words or more.
    #[arg(long)]
    word_limit: Option<usize>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    low_hi: Option<f64>,
    #[arg(long)]
    med_hi: Option<f64>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Whitespace-separated word vectors, one token per line.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Precomputed pair scores (`group_id,ref_id_a,ref_id_b,score`).
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Fall back to the embedding scorer for incomplete imported groups.
    #[arg(long)]
    lenient_import: bool,
    /// Groups held in memory at once when streaming.
    #[arg(long, default_value_t = 4096)]
    chunk: usize,
}

#[derive(Debug, Args)]
struct BinArgs {
    #[arg(long)]
    scored: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    Single,
    BinFiltered,
    Medium,
    Unfiltered,
    MediumPlus,
    AblationHigh,
}

fn parse_bin(s: &str) -> Result<SimilarityBin, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_subcategory(s: &str) -> Result<HighSubcategory, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scored: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n_source: Option<usize>,
    #[arg(long, value_parser = parse_bin)]
    bin: Option<SimilarityBin>,
    #[arg(long, value_parser = parse_bin)]
    add_bin: Option<SimilarityBin>,
    /// Tenths of the added bin to include.
    #[arg(long, value_parser = clap::value_parser!(u32).range(0..=10))]
    steps: Option<u32>,
    #[arg(long, value_parser = parse_subcategory)]
    subcategory: Option<HighSubcategory>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shuffle the instance order with this seed.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Pair-records file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scored: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    val_test_ratio: Option<f64>,
    #[arg(long)]
    ratio_tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Format {
    PairRecords,
    PromptLines,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::PairRecords => ExportFormat::PairRecords,
            Format::PromptLines => ExportFormat::PromptLines,
        }
    }
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Pair-records file produced by `build`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    delimiter: Option<String>,
    /// Prefix each source with `[language] `.
    #[arg(long)]
    language_tag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricName {
    Bleu,
    #[value(name = "chrfpp", alias = "chrf++")]
    Chrfpp,
    /// Mean of imported per-reference scores.
    External,
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// BLEU maximum n-gram order.
    #[arg(long)]
    max_order: Option<usize>,
    /// Lowercase before BLEU tokenization.
    #[arg(long)]
    lowercase: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Reference corpus (line-delimited groups).
    #[arg(long)]
    refs: PathBuf,
    /// Hypotheses: `{segment_id, language, hypothesis}` per line.
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bleu")]
    metric: MetricName,
    /// Per-reference scores for `--metric external`.
    #[arg(long)]
    external_scores: Option<PathBuf>,
    #[command(flatten)]
    metric_args: MetricArgs,
    #[arg(long)]
    per_segment: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SigtestArgs {
    #[arg(long)]
    refs: PathBuf,
    /// Baseline hypotheses, or per-reference scores with `--metric external`.
    #[arg(long)]
    baseline: PathBuf,
    /// Systems to compare, same form as the baseline.
    #[arg(long, required = true)]
    system: Vec<PathBuf>,
    #[arg(long, value_enum, default_values = ["bleu"])]
    metric: Vec<MetricName>,
    #[command(flatten)]
    metric_args: MetricArgs,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the result records as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    /// Per-language share of corpus groups used by a dataset.
    Composition {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of sim_p, as CSV and optionally SVG.
    Histogram {
        #[arg(long)]
        scored: PathBuf,
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Per-language difference between two eval reports (`b - a`).
    Gain {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Books, sources and references per language.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Overrides `[output] dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the top-level seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_usage() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);

    let config = match &cli.config {
        Some(path) => match PipelineConfig::load(path) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    if matches!(cli.command, Command::Pipeline(_)) && config.is_none() {
        eprintln!("error: pipeline needs --config");
        return ExitCode::from(2);
    }
    let threads = cli
        .threads
        .or_else(|| config.as_ref().and_then(|c| c.runtime.threads));
    let config = config.unwrap_or_default();

    match with_threads(threads, || commands::run(cli.command, &config)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub(crate) fn recipe_kind(kind: Kind) -> (RecipeKind, Option<SimilarityBin>) {
    match kind {
        Kind::Single => (RecipeKind::Single, None),
        Kind::BinFiltered => (RecipeKind::BinFiltered, None),
        Kind::Medium => (RecipeKind::BinFiltered, Some(SimilarityBin::Medium)),
        Kind::Unfiltered => (RecipeKind::Unfiltered, None),
        Kind::MediumPlus => (RecipeKind::MediumPlus, None),
        Kind::AblationHigh => (RecipeKind::AblationHigh, None),
    }
}

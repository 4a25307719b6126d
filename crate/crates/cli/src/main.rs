mod commands;
mod io;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "textfreq", version, about = "Sentence frequency tools: tables, scoring, selection, ordering, paraphrase datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count tokens of a corpus into a frequency table.
    BuildTable(BuildTableArgs),
    /// Convert a `token<TAB>zipf` list into a frequency table.
    ImportZipf(ImportZipfArgs),
    /// Score sentences against a table.
    Score(ScoreArgs),
    /// Pick the most frequent paraphrase of each set.
    Select(SelectArgs),
    /// Pick the least and most frequent paraphrase of each set.
    Extremes(SelectArgs),
    /// Build a table from story completions of training texts.
    Distill(DistillArgs),
    /// Score sentences with base and distilled frequencies combined.
    CombineScore(ScoreArgs),
    /// Order training data by sentence frequency or an external key.
    Sort(SortArgs),
    /// Paraphrase dataset construction and annotation service.
    Pipeline(PipelineArgs),
    /// Run the Zipf simulation checks.
    VerifyTheory(VerifyTheoryArgs),
    /// Histogram of Zipf-scale sentence frequencies.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// One document per line.
    Lines,
    /// One JSON object per line with a `text` field.
    Jsonl,
}

#[derive(Debug, Serialize, Args)]
pub struct BuildTableArgs {
    /// Corpus file, or `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "lines")]
    pub format: InputFormat,
    #[arg(long, default_value = "corpus")]
    pub label: String,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Keep letter case instead of lowercasing tokens.
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Serialize, Args)]
pub struct ImportZipfArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = textfreq::ingest::DEFAULT_VIRTUAL_TOTAL)]
    pub virtual_total: f64,
    #[arg(long, default_value = "zipf")]
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct ScorerArgs {
    /// Reference frequency table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Distilled table to blend with the reference table.
    #[arg(long)]
    pub distilled: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zeta: f64,
    /// Smallest word frequency used when scoring.
    #[arg(long, default_value_t = textfreq::freq::SmoothingPolicy::DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Serialize, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// A single sentence to score.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    /// File with one sentence per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// JSON lines `{"id": ..., "candidates": [...]}`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub provider: ProviderChoice,
    /// Fixture file for the mock provider.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Chat-completions base URL for the http provider.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    #[arg(long, default_value_t = textfreq::provider::CompletionRequest::DEFAULT_MAX_OUTPUT_TOKENS)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = textfreq::provider::CompletionRequest::DEFAULT_TEMPERATURE)]
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderChoice {
    Mock,
    Http,
}

#[derive(Debug, Serialize, Args)]
pub struct DistillArgs {
    #[command(flatten)]
    pub provider: ProviderArgs,
    /// Training texts.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "lines")]
    pub format: InputFormat,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub completions_per_text: usize,
    #[arg(long, default_value = "D-prime")]
    pub label: String,
    #[arg(long)]
    pub keep_case: bool,
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SortMode {
    /// Least frequent first.
    Ascending,
    /// Most frequent first.
    Descending,
    /// Ascending by the values in --scores.
    External,
}

#[derive(Debug, Serialize, Args)]
pub struct SortArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[arg(long, value_enum, default_value = "ascending")]
    pub mode: SortMode,
    /// Training records, one JSON object per line with an `id`.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON lines `{"id": ..., "score": ...}`; computed from --table when absent.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Record field holding the text to score.
    #[arg(long, default_value = "input_text")]
    pub text_field: String,
    /// Order file; the reordered records go to `<output>.data.jsonl`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Serialize, Args)]
pub struct PipelineArgs {
    /// State directory holding the journal.
    #[arg(long, default_value = "tfpd-state")]
    pub dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "a1,a2,a3")]
    pub annotators: Vec<String>,
    /// Seed for the blind presentation order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub action: PipelineAction,
}

#[derive(Debug, Serialize, Subcommand)]
pub enum PipelineAction {
    /// Serve the annotation API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Generate paraphrase jobs for a JSON-lines file of `{id, text, ground_truth}`.
    Ingest {
        source: PathBuf,
        #[command(flatten)]
        scorer: ScorerArgs,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Write accepted pairs and their length statistics.
    Export { dest: PathBuf },
    /// Print job counts by status.
    Progress,
}

#[derive(Debug, Serialize, Args)]
pub struct VerifyTheoryArgs {
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    /// Summary file (JSON lines); stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the (rank, ln rank, loss) rows of the perturbed model.
    #[arg(long)]
    pub semilog: Option<PathBuf>,
}

#[derive(Debug, Serialize, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// Sentences, one per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Ascending bin edges on the Zipf scale.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    pub edges: Vec<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Errors that should be reported like bad command-line usage.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Raised when a command ran but its checks did not pass.
#[derive(Debug)]
pub struct ChecksFailed(pub String);

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ChecksFailed {}

pub type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

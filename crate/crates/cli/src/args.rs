use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ppulse", version, about = "Implicit satisfaction signals from follow-up prompts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic corpus with planted sentiment, feedback and churn.
    Generate(GenerateArgs),
    /// Classify every qualifying turn of a corpus.
    Analyze(AnalyzeArgs),
    /// Compute one report from a corpus and its assessments.
    Report(ReportArgs),
    /// Draw a stratified sample of turns for manual annotation.
    Sample(SampleArgs),
    /// List turns whose score reaches either threshold, strongest first.
    Flag(FlagArgs),
    /// Serve the HTTP API over a corpus and its assessments.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub users: Option<usize>,
    /// Chosen at random and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub conversations_per_user: Option<f64>,
    #[arg(long)]
    pub turns_per_conversation: Option<f64>,
    #[arg(long)]
    pub single_turn_share: Option<f64>,
    /// Coefficient of variation of per-user negativity.
    #[arg(long)]
    pub heterogeneity: Option<f64>,
    /// Thumbs per user turn.
    #[arg(long)]
    pub feedback_rate: Option<f64>,
    #[arg(long)]
    pub feedback_nonneutral_share: Option<f64>,
    #[arg(long)]
    pub feedback_concordance: Option<f64>,
    #[arg(long)]
    pub error_log_rate: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub churn_link: Option<f64>,
    #[arg(long)]
    pub base_return_rate: Option<f64>,
    /// Mean total turns per conversation for negative, neutral and positive
    /// conversations, e.g. `10,4,6`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub length_profile: Option<Vec<f64>>,
    #[arg(long)]
    pub window_start: Option<String>,
    #[arg(long)]
    pub weeks: Option<u32>,
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub min_requests: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Lexicon,
    Remote,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "lexicon")]
    pub backend: BackendKind,
    #[arg(long, default_value = "assessments.jsonl")]
    pub out: PathBuf,
    /// Turns the backend failed on; always written, possibly empty.
    #[arg(long, default_value = "unscored.jsonl")]
    pub unscored: PathBuf,
    /// Model endpoint for the remote backend. The API token is read from
    /// PPULSE_API_TOKEN only.
    #[arg(long, env = "PPULSE_MODEL_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub retry_limit: Option<u32>,
    #[arg(long)]
    pub request_timeout_secs: Option<u64>,
    #[arg(long)]
    pub truncation_budget: Option<usize>,
    /// Replacement profanity word list, one word per line.
    #[arg(long)]
    pub profanity: Option<PathBuf>,
    /// Skip invalid corpus lines instead of failing.
    #[arg(long)]
    pub lenient: bool,
    /// Drop users with this many user turns or fewer before analysis.
    #[arg(long)]
    pub min_requests: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportName {
    Coverage,
    Precision,
    Churn,
    Length,
    PerUser,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    Turns,
    Conversations,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(value_enum)]
    pub kind: ReportName,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub assessments: PathBuf,
    /// Start of the subsequent period (churn only).
    #[arg(long)]
    pub boundary: Option<String>,
    /// Start of the initial period (churn only); defaults to the beginning.
    #[arg(long)]
    pub initial_start: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long = "user-agg", visible_alias = "aggregation", value_enum, default_value = "turns")]
    pub aggregation: Aggregation,
    /// Apply the continuity correction to the precision chi-square.
    #[arg(long)]
    pub yates: bool,
    /// Write to this file instead of stdout.
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<PathBuf>,
    /// Write `<report>.<ext>` into this directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub assessments: PathBuf,
    #[arg(long)]
    pub per_class: usize,
    /// Chosen at random and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Annotation store directory in which to open sessions for `--rater`.
    #[arg(long, requires = "rater")]
    pub store: Option<PathBuf>,
    /// Open one session per rater over the sample.
    #[arg(long, requires = "store")]
    pub rater: Vec<String>,
}

#[derive(Args, Debug)]
pub struct FlagArgs {
    #[arg(long)]
    pub assessments: PathBuf,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub neg_threshold: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub pos_threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub assessments: PathBuf,
    /// Annotation store directory; sessions are kept in memory when omitted.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Send permissive CORS headers for a UI on another origin.
    #[arg(long)]
    pub cors: bool,
}

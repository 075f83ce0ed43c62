use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};

use ppulse::analysis::{
    churn_analysis, coverage_report, explicit_feedback_comparison, flag_salient,
    length_by_sentiment, per_user_report, sample_for_annotation, AnalysisError, ChurnOptions,
    Report, ReportFormat, ReportKind,
};
use ppulse::annotate::AnnotationStore;
use ppulse::corpus::{
    generate_synthetic, parse_corpus, parse_ts, write_corpus, Corpus, GeneratorParams,
    LengthProfile, ParseOptions,
};
use ppulse::scoring::{
    assess_corpus, read_assessments, write_assessments, write_unscored, TurnAssessment,
    UserAggregation,
};
use ppulse::sentiment::{Backend, BackendConfig, SentimentEngine};
use ppulse_service::{AppState, ServiceConfig};

use crate::args::*;
use crate::CliError;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Sample(a) => sample(a),
        Command::Flag(a) => flag(a),
        Command::Serve(a) => serve(a),
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn timestamp(raw: &str, flag: &str) -> Result<DateTime<Utc>, CliError> {
    parse_ts(raw).ok_or_else(|| CliError::Usage(format!("--{flag}: not an RFC 3339 timestamp: {raw}")))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_corpus(path: &Path, lenient: bool) -> Result<Corpus, CliError> {
    parse_corpus(open(path)?, &path.display().to_string(), ParseOptions { lenient })
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_assessments(path: &Path) -> Result<Vec<TurnAssessment>, CliError> {
    read_assessments(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes to `path`, or stdout when `None`.
fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let result = match path {
        Some(p) => File::create(p).and_then(|file| {
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).and_then(|_| lock.flush())
        }
    };
    result.map_err(|e| {
        let target = path.map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
        CliError::Data(format!("{target}: {e}"))
    })
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let mut p = GeneratorParams::with_seed(seed_or_random(a.seed));
    macro_rules! set {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = a.$flag { p.$field = v; })*
        };
    }
    set!(
        users => n_users,
        conversations_per_user => mean_conversations_per_user,
        turns_per_conversation => mean_user_turns_per_conversation,
        single_turn_share => single_turn_share,
        heterogeneity => user_heterogeneity,
        feedback_rate => explicit_feedback_turn_rate,
        feedback_nonneutral_share => feedback_nonneutral_share,
        feedback_concordance => feedback_concordance,
        error_log_rate => error_log_rate,
        churn_link => churn_link,
        base_return_rate => base_return_rate,
        weeks => window_weeks,
        min_requests => min_requests,
    );
    if let Some(v) = a.length_profile {
        p.length_profile = Some(LengthProfile::new(v[0], v[1], v[2]));
    }
    if let Some(raw) = &a.window_start {
        p.window_start = timestamp(raw, "window-start")?;
    }
    if let Some(raw) = &a.boundary {
        p.period_boundary = timestamp(raw, "boundary")?;
    }
    let corpus = generate_synthetic(&p).map_err(|e| CliError::Usage(e.to_string()))?;
    write_output(a.out.as_deref(), |w| write_corpus(&corpus, w))
}

fn backend_config(a: &AnalyzeArgs) -> Result<BackendConfig, CliError> {
    let mut config = match a.backend {
        BackendKind::Lexicon => BackendConfig::lexicon(),
        BackendKind::Remote => {
            let endpoint = a.endpoint.clone().ok_or_else(|| {
                CliError::Usage("the remote backend needs --endpoint or PPULSE_MODEL_ENDPOINT".into())
            })?;
            let mut c = BackendConfig::remote(endpoint);
            c.api_token = std::env::var("PPULSE_API_TOKEN").ok().filter(|t| !t.is_empty());
            c
        }
    };
    if let Some(v) = a.max_in_flight {
        config.max_in_flight = v;
    }
    if let Some(v) = a.retry_limit {
        config.retry_limit = v;
    }
    if let Some(v) = a.request_timeout_secs {
        config.request_timeout = Duration::from_secs(v);
    }
    if let Some(v) = a.truncation_budget {
        config.truncation_budget = v;
    }
    config.profanity_list = a.profanity.clone();
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let config = backend_config(&a)?;
    let mut corpus = load_corpus(&a.corpus, a.lenient)?;
    if let Some(min) = a.min_requests {
        corpus = corpus.filter_min_requests(min);
    }
    let engine = SentimentEngine::from_config(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let run = assess_corpus(&corpus, &engine);
    write_output(Some(&a.out), |w| write_assessments(&run.assessments, w))?;
    write_output(Some(&a.unscored), |w| write_unscored(&run.unscored, w))?;
    let total = run.assessments.len() + run.unscored.len();
    eprintln!(
        "assessed {} of {total} qualifying turns; {} unscored (listed in {})",
        run.assessments.len(),
        run.unscored.len(),
        a.unscored.display()
    );
    if total > 0 && run.assessments.is_empty() && config.kind == Backend::Remote {
        let first = &run.unscored[0].error;
        return Err(CliError::Backend(format!("every turn failed; first error: {first}")));
    }
    Ok(())
}

fn data_error(e: AnalysisError) -> CliError {
    CliError::Data(e.to_string())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let boundary = a.boundary.as_deref().map(|r| timestamp(r, "boundary")).transpose()?;
    let initial_start = a.initial_start.as_deref().map(|r| timestamp(r, "initial-start")).transpose()?;
    if a.kind == ReportName::Churn && boundary.is_none() {
        return Err(CliError::Usage("report churn needs --boundary".into()));
    }
    let corpus = load_corpus(&a.corpus, false)?;
    let assessments = load_assessments(&a.assessments)?;
    let aggregation = match a.aggregation {
        Aggregation::Turns => UserAggregation::Turns,
        Aggregation::Conversations => UserAggregation::Conversations,
    };
    let format = match a.format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
        Format::Table => ReportFormat::Table,
    };
    let (kind, rendered) = match a.kind {
        ReportName::Coverage => {
            let r = coverage_report(&corpus, &assessments).map_err(data_error)?;
            (r.kind(), r.render(format))
        }
        ReportName::Precision => {
            let r = explicit_feedback_comparison(&corpus, &assessments, a.yates).map_err(data_error)?;
            (r.kind(), r.render(format))
        }
        ReportName::Churn => {
            let options = ChurnOptions {
                boundary: boundary.expect("checked above"),
                initial_start,
                aggregation,
            };
            let r = churn_analysis(&corpus, &assessments, options).map_err(data_error)?;
            (r.kind(), r.render(format))
        }
        ReportName::Length => {
            let r = length_by_sentiment(&corpus, &assessments).map_err(data_error)?;
            (r.kind(), r.render(format))
        }
        ReportName::PerUser => {
            let r = per_user_report(&assessments, &corpus, aggregation).map_err(data_error)?;
            (r.kind(), r.render(format))
        }
    };
    let path: Option<PathBuf> = match (&a.out, &a.out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => Some(dir.join(ReportKind::file_name(kind, format))),
        (None, None) => None,
    };
    write_output(path.as_deref(), |w| w.write_all(rendered.as_bytes()))
}

fn sample(a: SampleArgs) -> Result<(), CliError> {
    let seed = seed_or_random(a.seed);
    let assessments = load_assessments(&a.assessments)?;
    let s = sample_for_annotation(&assessments, a.per_class, seed);
    for (class, missing) in &s.shortfall {
        eprintln!("warning: {} class is {missing} short of {}", class.as_str(), a.per_class);
    }
    if let Some(dir) = &a.store {
        let store = AnnotationStore::open(dir).map_err(|e| CliError::Data(e.to_string()))?;
        for rater in &a.rater {
            let session = store.create_session(&s.refs(), rater).map_err(|e| CliError::Data(e.to_string()))?;
            eprintln!("session {} for rater {rater}", session.id);
        }
    }
    let json = serde_json::to_string_pretty(&s).expect("sample serializes");
    write_output(a.out.as_deref(), |w| writeln!(w, "{json}"))
}

fn flag(a: FlagArgs) -> Result<(), CliError> {
    let assessments = load_assessments(&a.assessments)?;
    let flagged = flag_salient(&assessments, a.neg_threshold, a.pos_threshold)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_output(a.out.as_deref(), |w| write_assessments(&flagged, w))
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("--host/--port: {e}")))?;
    let corpus = load_corpus(&a.corpus, false)?;
    let assessments = load_assessments(&a.assessments)?;
    let store = match &a.store {
        Some(dir) => AnnotationStore::open(dir).map_err(|e| CliError::Data(e.to_string()))?,
        None => AnnotationStore::in_memory(),
    };
    let state = AppState::new(corpus, assessments, store).map_err(data_error)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(ppulse_service::serve(addr, state, ServiceConfig { cors: a.cors }))
        .map_err(|e| CliError::Data(format!("{addr}: {e}")))
}

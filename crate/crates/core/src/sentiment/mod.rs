//! Five-point sentiment classification of user turns, with the error-log
//! refinement applied to initially negative results.

mod lexicon;
mod remote;
mod separation;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use lexicon::{lexicon_classify, tokenize, Lexicon, LexiconHits};
pub use remote::{
    parse_separation_response, parse_sentiment_response, render_prompt, HttpTransport,
    RemoteClient, Transport, TransportError, PLACEHOLDER, SENTIMENT_TEMPLATE, SEPARATION_TEMPLATE,
};
pub use separation::{
    detect_error_log, is_log_line, log_line_rule, LineRule, MessageKind, SeparationResult,
    SeparationSource,
};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SentimentLabel {
    ExtremelyNegative,
    Negative,
    Neutral,
    Positive,
    ExtremelyPositive,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 5] = [
        SentimentLabel::ExtremelyNegative,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
        SentimentLabel::ExtremelyPositive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::ExtremelyNegative => "extremely_negative",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Positive => "positive",
            SentimentLabel::ExtremelyPositive => "extremely_positive",
        }
    }

    /// Position in [`SentimentLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_negative(self) -> bool {
        matches!(self, SentimentLabel::ExtremelyNegative | SentimentLabel::Negative)
    }

    pub fn is_positive(self) -> bool {
        matches!(self, SentimentLabel::Positive | SentimentLabel::ExtremelyPositive)
    }

    /// Collapses to the three-way negative / neutral / positive grouping.
    pub fn polarity(self) -> Polarity {
        if self.is_negative() {
            Polarity::Negative
        } else if self.is_positive() {
            Polarity::Positive
        } else {
            Polarity::Neutral
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SentimentLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown sentiment label `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Negative, Polarity::Neutral, Polarity::Positive];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Positive => "positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Lexicon,
    Remote,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Lexicon => "lexicon",
            Backend::Remote => "remote",
        }
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexicon" => Ok(Backend::Lexicon),
            "remote" => Ok(Backend::Remote),
            _ => Err(format!("unknown backend `{s}` (expected lexicon or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationResult {
    pub label: SentimentLabel,
    /// Label before refinement; equals `label` when `refined` is false.
    pub initial_label: SentimentLabel,
    pub rationale: String,
    pub backend: Backend,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SentimentError {
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("backend unavailable after {attempts} attempts: {last_error}")]
    BackendUnavailable { attempts: u32, last_error: String },
    #[error("backend response names no sentiment label: {response:?}")]
    UnparseableResponse { response: String },
}

pub const DEFAULT_TRUNCATION_BUDGET: usize = 8000;

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: Backend,
    pub endpoint: Option<String>,
    pub api_token: Option<String>,
    /// Characters kept from the head of each text.
    pub truncation_budget: usize,
    pub max_in_flight: usize,
    pub retry_limit: u32,
    pub backoff_base: Duration,
    pub request_timeout: Duration,
    pub profanity_list: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: Backend::Lexicon,
            endpoint: None,
            api_token: None,
            truncation_budget: DEFAULT_TRUNCATION_BUDGET,
            max_in_flight: 4,
            retry_limit: 3,
            backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(60),
            profanity_list: None,
        }
    }
}

impl BackendConfig {
    pub fn lexicon() -> Self {
        Self::default()
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: Backend::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SentimentError> {
        self.validate_limits()?;
        if self.kind == Backend::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(SentimentError::Config("remote backend needs an endpoint".into()));
        }
        Ok(())
    }

    // Checks that hold whatever the transport; the endpoint only matters for
    // the HTTP one.
    fn validate_limits(&self) -> Result<(), SentimentError> {
        if self.truncation_budget < 1 {
            return Err(SentimentError::Config("truncation_budget must be at least 1".into()));
        }
        if self.max_in_flight < 1 {
            return Err(SentimentError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }
}

/// Keeps the first `budget` characters (code points) of `text`.
pub fn truncate_for_analysis(text: &str, budget: usize) -> &str {
    match text.char_indices().nth(budget) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

/// A configured classifier: truncation, backend, and refinement.
pub struct SentimentEngine {
    truncation_budget: usize,
    lexicon: Lexicon,
    remote: Option<RemoteClient>,
    concurrency: usize,
}

impl SentimentEngine {
    pub fn from_config(config: &BackendConfig) -> Result<Self, SentimentError> {
        config.validate()?;
        let remote = match config.kind {
            Backend::Lexicon => None,
            Backend::Remote => {
                let endpoint = config.endpoint.as_deref().expect("validated");
                let transport =
                    HttpTransport::new(endpoint, config.api_token.clone(), config.request_timeout)
                        .map_err(|e| SentimentError::Config(e.0))?;
                Some(Arc::new(transport) as Arc<dyn Transport>)
            }
        };
        Self::with_transport(config, remote)
    }

    /// Builds an engine around a caller-supplied transport (remote kind only).
    pub fn with_transport(
        config: &BackendConfig,
        transport: Option<Arc<dyn Transport>>,
    ) -> Result<Self, SentimentError> {
        config.validate_limits()?;
        let lexicon = match &config.profanity_list {
            Some(path) => Lexicon::from_profanity_file(path)
                .map_err(|e| SentimentError::Config(format!("{}: {e}", path.display())))?,
            None => Lexicon::default(),
        };
        let remote = match (config.kind, transport) {
            (Backend::Lexicon, _) => None,
            (Backend::Remote, Some(t)) => Some(RemoteClient::new(
                t,
                config.max_in_flight,
                config.retry_limit,
                config.backoff_base,
            )),
            (Backend::Remote, None) => {
                return Err(SentimentError::Config("remote backend needs a transport".into()))
            }
        };
        let concurrency = match config.kind {
            Backend::Lexicon => std::thread::available_parallelism().map_or(1, |n| n.get()),
            Backend::Remote => config.max_in_flight,
        };
        Ok(Self {
            truncation_budget: config.truncation_budget,
            lexicon,
            remote,
            concurrency,
        })
    }

    pub fn lexicon_only() -> Self {
        Self::from_config(&BackendConfig::lexicon()).expect("default config is valid")
    }

    pub fn backend(&self) -> Backend {
        if self.remote.is_some() {
            Backend::Remote
        } else {
            Backend::Lexicon
        }
    }

    /// Number of worker threads callers should use when fanning out.
    pub fn concurrency(&self) -> usize {
        self.concurrency
    }

    pub fn remote_client(&self) -> Option<&RemoteClient> {
        self.remote.as_ref()
    }

    /// Single classification through the configured backend, no refinement.
    pub fn classify(&self, text: &str) -> Result<ClassificationResult, SentimentError> {
        let text = truncate_for_analysis(text, self.truncation_budget);
        match &self.remote {
            None => Ok(self.lexicon.classify(text)),
            Some(client) => {
                let (label, rationale) = client.classify(text)?;
                Ok(ClassificationResult {
                    label,
                    initial_label: label,
                    rationale,
                    backend: Backend::Remote,
                    refined: false,
                })
            }
        }
    }

    pub fn separate(&self, text: &str) -> Result<SeparationResult, SentimentError> {
        match &self.remote {
            None => Ok(detect_error_log(text)),
            Some(client) => client.separate(text),
        }
    }

    /// Truncate, classify, and for negative results strip pasted error logs
    /// and classify the human-written remainder.
    pub fn classify_with_refinement(
        &self,
        text: &str,
    ) -> Result<ClassificationResult, SentimentError> {
        let text = truncate_for_analysis(text, self.truncation_budget);
        let initial = self.classify(text)?;
        if !initial.label.is_negative() {
            return Ok(initial);
        }
        let separation = self.separate(text)?;
        match separation.classification {
            MessageKind::HumanMessageOnly => Ok(initial),
            MessageKind::ErrorMessageOnly => Ok(ClassificationResult {
                label: SentimentLabel::Neutral,
                initial_label: initial.label,
                rationale: format!(
                    "error log only ({:?} separation); initial: {}",
                    separation.source, initial.rationale
                ),
                backend: initial.backend,
                refined: true,
            }),
            MessageKind::MixedMessage => {
                let second = self.classify(&separation.human_text)?;
                Ok(ClassificationResult {
                    label: second.label,
                    initial_label: initial.label,
                    rationale: format!(
                        "re-classified human text ({:?} separation): {}",
                        separation.source, second.rationale
                    ),
                    backend: initial.backend,
                    refined: true,
                })
            }
        }
    }
}

/// Classifies one text through a remote endpoint described by `config`.
pub fn remote_classify(
    text: &str,
    config: &BackendConfig,
) -> Result<ClassificationResult, SentimentError> {
    if config.kind != Backend::Remote {
        return Err(SentimentError::Config("remote_classify needs a remote config".into()));
    }
    SentimentEngine::from_config(config)?.classify(text)
}

/// Runs the remote separation prompt, falling back to the heuristic on an
/// unusable answer.
pub fn separate_human_text_remote(
    text: &str,
    config: &BackendConfig,
) -> Result<SeparationResult, SentimentError> {
    if config.kind != Backend::Remote {
        return Err(SentimentError::Config("remote separation needs a remote config".into()));
    }
    SentimentEngine::from_config(config)?.separate(text)
}

pub fn classify_with_refinement(
    text: &str,
    config: &BackendConfig,
) -> Result<ClassificationResult, SentimentError> {
    SentimentEngine::from_config(config)?.classify_with_refinement(text)
}

#[cfg(test)]
mod tests {
    use super::remote::mock::Scripted;
    use super::*;
    use SentimentLabel::*;

    #[test]
    fn truncation_rules() {
        assert_eq!(truncate_for_analysis("abc", 8000), "abc");
        let long = "x".repeat(10_000);
        assert_eq!(truncate_for_analysis(&long, 8000), "x".repeat(8000));
        assert_eq!(truncate_for_analysis("", 8000), "");
        // never splits a code point
        assert_eq!(truncate_for_analysis("héllo", 2), "hé");
        assert_eq!(truncate_for_analysis("🦀🦀🦀", 1), "🦀");
    }

    #[test]
    fn label_round_trips_through_str() {
        for l in SentimentLabel::ALL {
            assert_eq!(l.as_str().parse::<SentimentLabel>().unwrap(), l);
        }
        assert!("meh".parse::<SentimentLabel>().is_err());
    }

    #[test]
    fn pure_stack_trace_refines_to_neutral() {
        let engine = SentimentEngine::lexicon_only();
        let trace = "ERROR: Build failed with 2 errors\nsrc/lib.rs:10:5: expected `i32`, found `String`";
        assert_eq!(engine.classify(trace).unwrap().label, Negative);
        let r = engine.classify_with_refinement(trace).unwrap();
        assert_eq!(r.label, Neutral);
        assert_eq!(r.initial_label, Negative);
        assert!(r.refined);
    }

    #[test]
    fn mixed_text_reclassifies_human_part() {
        let engine = SentimentEngine::lexicon_only();
        let text = "this is wrong\nException in thread \"main\" java.lang.IllegalStateException\n\tat com.example.App.main(App.java:12)";
        let r = engine.classify_with_refinement(text).unwrap();
        assert_eq!(r.label, Negative);
        assert!(r.refined);
    }

    #[test]
    fn positive_text_skips_refinement() {
        let r = classify_with_refinement("Thanks, works now!", &BackendConfig::lexicon()).unwrap();
        assert!(r.label.is_positive());
        assert!(!r.refined);
    }

    #[test]
    fn human_only_negative_keeps_label() {
        let r = classify_with_refinement("No, that's wrong.", &BackendConfig::lexicon()).unwrap();
        assert_eq!(r.label, Negative);
        assert!(!r.refined);
    }

    #[test]
    fn remote_engine_refines_with_remote_separation() {
        let t = Arc::new(Scripted::new(
            vec![
                Ok("Label: negative".into()),
                Ok("mixed_message\nHuman message: \"thanks, great\"".into()),
                Ok("Label: extremely positive".into()),
            ],
            Err(TransportError("exhausted".into())),
        ));
        let cfg = BackendConfig {
            backoff_base: Duration::ZERO,
            ..BackendConfig::remote("http://unused")
        };
        let engine = SentimentEngine::with_transport(&cfg, Some(t)).unwrap();
        let r = engine.classify_with_refinement("anything").unwrap();
        assert_eq!(r.label, ExtremelyPositive);
        assert_eq!(r.initial_label, Negative);
        assert_eq!(r.backend, Backend::Remote);
        assert!(r.refined);
        assert!(!r.rationale.is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BackendConfig::lexicon();
        cfg.truncation_budget = 0;
        assert!(cfg.validate().is_err());
        let cfg = BackendConfig {
            kind: Backend::Remote,
            ..BackendConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(SentimentError::Config(_))));
        assert!(remote_classify("x", &BackendConfig::lexicon()).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_backend_unavailable() {
        let cfg = BackendConfig {
            retry_limit: 1,
            backoff_base: Duration::ZERO,
            request_timeout: Duration::from_millis(500),
            ..BackendConfig::remote("http://127.0.0.1:9/complete")
        };
        let err = remote_classify("hello", &cfg).unwrap_err();
        assert!(matches!(err, SentimentError::BackendUnavailable { attempts: 2, .. }), "{err:?}");
    }
}

//! Client for a remote text-completion endpoint plus the parsers that turn
//! its free-text answers into labels.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use once_cell::sync::Lazy;
use regex::Regex;
use serde_json::Value;

use super::separation::{detect_error_log, MessageKind, SeparationResult, SeparationSource};
use super::{SentimentError, SentimentLabel};

pub const SENTIMENT_TEMPLATE: &str = include_str!("../../prompts/sentiment.txt");
pub const SEPARATION_TEMPLATE: &str = include_str!("../../prompts/separation.txt");
pub const PLACEHOLDER: &str = "[[text]]";

pub fn render_prompt(template: &str, text: &str) -> String {
    template.replace(PLACEHOLDER, text)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// One request/response exchange with a completion model.
pub trait Transport: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, TransportError>;
}

/// POSTs `{"prompt": ...}` and reads either a JSON object carrying a `text`
/// (or `completion` / `output`) string, or a plain-text body.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: &str, token: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.to_string(),
            token,
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        let body = serde_json::json!({ "prompt": prompt }).to_string();
        let mut req = self
            .client
            .post(&self.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError(format!("HTTP {status}: {}", text.trim())));
        }
        Ok(extract_completion(&text))
    }
}

fn extract_completion(body: &str) -> String {
    if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(body) {
        for key in ["text", "completion", "output"] {
            if let Some(Value::String(s)) = obj.get(key) {
                return s.clone();
            }
        }
    }
    body.to_string()
}

/// Counting semaphore that caps concurrent requests.
#[derive(Debug)]
struct Gate {
    limit: usize,
    state: Mutex<(usize, usize)>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            state: Mutex::new((0, 0)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().expect("gate lock");
        while st.0 >= self.limit {
            st = self.freed.wait(st).expect("gate lock");
        }
        st.0 += 1;
        st.1 = st.1.max(st.0);
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.0.state.lock().expect("gate lock");
        st.0 -= 1;
        self.0.freed.notify_one();
    }
}

/// Retrying, concurrency-bounded access to a [`Transport`].
pub struct RemoteClient {
    transport: Arc<dyn Transport>,
    retry_limit: u32,
    backoff_base: Duration,
    gate: Gate,
}

const MAX_BACKOFF: Duration = Duration::from_secs(30);

impl RemoteClient {
    pub fn new(
        transport: Arc<dyn Transport>,
        max_in_flight: usize,
        retry_limit: u32,
        backoff_base: Duration,
    ) -> Self {
        Self {
            transport,
            retry_limit,
            backoff_base,
            gate: Gate::new(max_in_flight),
        }
    }

    pub fn max_in_flight(&self) -> usize {
        self.gate.limit
    }

    /// Highest number of simultaneous requests observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.gate.state.lock().expect("gate lock").1
    }

    /// Sends a prompt, retrying up to `retry_limit` times with exponential
    /// backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, SentimentError> {
        let mut last = TransportError(String::new());
        for attempt in 0..=self.retry_limit {
            let outcome = {
                let _permit = self.gate.acquire();
                self.transport.complete(prompt)
            };
            match outcome {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
            if attempt < self.retry_limit {
                let delay = self.backoff_base.saturating_mul(1u32 << attempt.min(16));
                thread::sleep(delay.min(MAX_BACKOFF));
            }
        }
        Err(SentimentError::BackendUnavailable {
            attempts: self.retry_limit + 1,
            last_error: last.0,
        })
    }

    pub fn classify(&self, text: &str) -> Result<(SentimentLabel, String), SentimentError> {
        let response = self.complete(&render_prompt(SENTIMENT_TEMPLATE, text))?;
        match parse_sentiment_response(&response) {
            Some(label) => Ok((label, response)),
            None => Err(SentimentError::UnparseableResponse { response }),
        }
    }

    pub fn separate(&self, text: &str) -> Result<SeparationResult, SentimentError> {
        let response = self.complete(&render_prompt(SEPARATION_TEMPLATE, text))?;
        Ok(parse_separation_response(&response, text).unwrap_or_else(|| SeparationResult {
            source: SeparationSource::HeuristicFallback,
            ..detect_error_log(text)
        }))
    }
}

fn normalize_labels(response: &str) -> String {
    response
        .chars()
        .map(|c| match c {
            '_' | '-' => ' ',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

fn earliest<T: Copy>(haystack: &str, candidates: &[(&str, T)]) -> Option<T> {
    candidates
        .iter()
        .filter_map(|&(needle, v)| haystack.find(needle).map(|pos| (pos, v)))
        .min_by_key(|&(pos, _)| pos)
        .map(|(_, v)| v)
}

/// Finds the label named in a free-text answer. Two-word labels are searched
/// before one-word labels so "extremely negative" never reads as "negative";
/// within a tier the earliest mention wins.
pub fn parse_sentiment_response(response: &str) -> Option<SentimentLabel> {
    use SentimentLabel::*;
    let norm = normalize_labels(response);
    earliest(
        &norm,
        &[
            ("extremely negative", ExtremelyNegative),
            ("extremely positive", ExtremelyPositive),
        ],
    )
    .or_else(|| {
        earliest(
            &norm,
            &[("negative", Negative), ("neutral", Neutral), ("positive", Positive)],
        )
    })
}

static HUMAN_MESSAGE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r#"(?im)human[ _-]?(?:written[ _-]?)?message\s*(?::|=|\bis\b)\s*(.*)$"#)
        .expect("valid regex")
});

/// Parses a separation answer. `None` means the answer was unusable and the
/// caller should fall back to the heuristic.
pub fn parse_separation_response(response: &str, input: &str) -> Option<SeparationResult> {
    let norm = normalize_labels(response);
    let kind = earliest(
        &norm,
        &MessageKind::ALL.map(|k| (match k {
            MessageKind::ErrorMessageOnly => "error message only",
            MessageKind::HumanMessageOnly => "human message only",
            MessageKind::MixedMessage => "mixed message",
        }, k)),
    )?;
    let human_text = match kind {
        MessageKind::ErrorMessageOnly => String::new(),
        MessageKind::HumanMessageOnly => input.to_string(),
        MessageKind::MixedMessage => {
            let extracted = HUMAN_MESSAGE
                .captures_iter(response)
                .filter_map(|c| c.get(1))
                .map(|m| strip_quotes(m.as_str()))
                .find(|s| !s.is_empty())?;
            extracted.to_string()
        }
    };
    Some(SeparationResult {
        classification: kind,
        human_text,
        source: SeparationSource::Remote,
    })
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim().trim_end_matches(['.', ';', ',']).trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('\u{201c}', '\u{201d}')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s
}

#[cfg(test)]
pub(crate) mod mock {
    use super::*;
    use std::collections::VecDeque;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Replays scripted outcomes in order, then repeats the fallback.
    pub struct Scripted {
        pub script: Mutex<VecDeque<Result<String, TransportError>>>,
        pub fallback: Result<String, TransportError>,
        pub calls: AtomicUsize,
    }

    impl Scripted {
        pub fn new(
            script: Vec<Result<String, TransportError>>,
            fallback: Result<String, TransportError>,
        ) -> Self {
            Self {
                script: Mutex::new(script.into()),
                fallback,
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for Scripted {
        fn complete(&self, _prompt: &str) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.script
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| self.fallback.clone())
        }
    }
}

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Serialize, Serializer};

/// Who wrote a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Author {
    User,
    Ai,
}

impl Author {
    pub fn as_str(self) -> &'static str {
        match self {
            Author::User => "user",
            Author::Ai => "ai",
        }
    }
}

/// Explicit thumbs rating attached to an AI turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Feedback {
    Up,
    Down,
    #[default]
    None,
}

impl Feedback {
    pub fn as_str(self) -> Option<&'static str> {
        match self {
            Feedback::Up => Some("up"),
            Feedback::Down => Some("down"),
            Feedback::None => None,
        }
    }

    pub fn is_some(self) -> bool {
        self != Feedback::None
    }
}

impl Serialize for Feedback {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.as_str() {
            Some(s) => serializer.serialize_str(s),
            None => serializer.serialize_none(),
        }
    }
}

pub(crate) fn serialize_ts<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_ts(ts))
}

pub(crate) fn serialize_ts_opt<S: Serializer>(
    ts: &Option<DateTime<Utc>>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match ts {
        Some(t) => serialize_ts(t, s),
        None => s.serialize_none(),
    }
}

/// RFC 3339 at second resolution with a `Z` suffix.
pub fn format_ts(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub idx: usize,
    pub author: Author,
    #[serde(serialize_with = "serialize_ts")]
    pub ts: DateTime<Utc>,
    pub text: String,
    pub feedback: Feedback,
}

impl Turn {
    pub fn is_user(&self) -> bool {
        self.author == Author::User
    }

    pub fn is_ai(&self) -> bool {
        self.author == Author::Ai
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conversation {
    pub id: String,
    pub user_id: String,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn turn(&self, idx: usize) -> Option<&Turn> {
        self.turns.get(idx).filter(|t| t.idx == idx).or_else(|| self.turns.iter().find(|t| t.idx == idx))
    }

    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.is_user())
    }

    pub fn started_at(&self) -> Option<DateTime<Utc>> {
        self.turns.first().map(|t| t.ts)
    }
}

/// A broken invariant found by [`validate_conversation`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub turn_idx: Option<usize>,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    EmptyConversation,
    FirstTurnNotUser,
    NonConsecutiveIdx,
    FeedbackOnUserTurn,
    TimestampDecreasing,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::EmptyConversation => "conversation has no turns",
            Rule::FirstTurnNotUser => "first turn must be user",
            Rule::NonConsecutiveIdx => "non-consecutive idx",
            Rule::FeedbackOnUserTurn => "feedback on user turn",
            Rule::TimestampDecreasing => "timestamp decreases",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.turn_idx {
            Some(idx) => write!(f, "turn {idx}: {}", self.rule.describe()),
            None => f.write_str(self.rule.describe()),
        }
    }
}

/// Lists every broken turn/conversation invariant; empty when the
/// conversation is well formed.
pub fn validate_conversation(conv: &Conversation) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(first) = conv.turns.first() else {
        out.push(Violation {
            turn_idx: None,
            rule: Rule::EmptyConversation,
        });
        return out;
    };
    if !first.is_user() {
        out.push(Violation {
            turn_idx: Some(first.idx),
            rule: Rule::FirstTurnNotUser,
        });
    }
    if first.idx != 0 {
        out.push(Violation {
            turn_idx: Some(first.idx),
            rule: Rule::NonConsecutiveIdx,
        });
    }
    for (i, turn) in conv.turns.iter().enumerate() {
        if turn.is_user() && turn.feedback.is_some() {
            out.push(Violation {
                turn_idx: Some(turn.idx),
                rule: Rule::FeedbackOnUserTurn,
            });
        }
        if i == 0 {
            continue;
        }
        let prev = &conv.turns[i - 1];
        if turn.idx != prev.idx + 1 {
            out.push(Violation {
                turn_idx: Some(turn.idx),
                rule: Rule::NonConsecutiveIdx,
            });
        }
        if turn.ts < prev.ts {
            out.push(Violation {
                turn_idx: Some(turn.idx),
                rule: Rule::TimestampDecreasing,
            });
        }
    }
    out
}

/// Where a corpus came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusMeta {
    Generated { params: super::GeneratorParams },
    Ingested { source: String, lenient: bool },
    Derived { from: String, note: String },
    Empty,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate conversation id `{0}`")]
    DuplicateId(String),
}

/// An immutable collection of conversations with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    conversations: Vec<Conversation>,
    meta: CorpusMeta,
}

impl Corpus {
    pub fn new(conversations: Vec<Conversation>, meta: CorpusMeta) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(conversations.len());
        for c in &conversations {
            if !seen.insert(c.id.as_str()) {
                return Err(CorpusError::DuplicateId(c.id.clone()));
            }
        }
        Ok(Self {
            conversations,
            meta,
        })
    }

    pub fn empty() -> Self {
        Self {
            conversations: Vec::new(),
            meta: CorpusMeta::Empty,
        }
    }

    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    pub fn meta(&self) -> &CorpusMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.conversations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Conversation> {
        self.conversations.iter().find(|c| c.id == id)
    }

    /// Sorted, de-duplicated user ids.
    pub fn user_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.conversations.iter().map(|c| c.user_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn user_turn_count(&self) -> usize {
        self.conversations.iter().map(|c| c.user_turns().count()).sum()
    }

    // subsets of a valid corpus keep unique ids
    fn subset(&self, conversations: Vec<Conversation>, note: &str) -> Corpus {
        Corpus {
            conversations,
            meta: CorpusMeta::Derived {
                from: self.source_label(),
                note: note.to_string(),
            },
        }
    }

    fn source_label(&self) -> String {
        match &self.meta {
            CorpusMeta::Generated { params } => format!("generated(seed={})", params.seed),
            CorpusMeta::Ingested { source, .. } => source.clone(),
            CorpusMeta::Derived { from, note } => format!("{from}/{note}"),
            CorpusMeta::Empty => "empty".into(),
        }
    }

    /// Keeps only users with more than `min_requests` user turns.
    pub fn filter_min_requests(&self, min_requests: usize) -> Corpus {
        let mut per_user = std::collections::HashMap::<&str, usize>::new();
        for c in &self.conversations {
            *per_user.entry(c.user_id.as_str()).or_default() += c.user_turns().count();
        }
        let kept = self
            .conversations
            .iter()
            .filter(|c| per_user[c.user_id.as_str()] > min_requests)
            .cloned()
            .collect();
        self.subset(kept, &format!("min_requests>{min_requests}"))
    }
}

/// Splits conversations by the timestamp of their first turn: those starting
/// before `boundary` go to the initial period, the rest to the subsequent one.
pub fn split_periods(corpus: &Corpus, boundary: DateTime<Utc>) -> (Corpus, Corpus) {
    let (initial, subsequent): (Vec<_>, Vec<_>) = corpus
        .conversations
        .iter()
        .cloned()
        .partition(|c| c.started_at().is_some_and(|ts| ts < boundary));
    let tag = format_ts(&boundary);
    (
        corpus.subset(initial, &format!("before {tag}")),
        corpus.subset(subsequent, &format!("from {tag}")),
    )
}

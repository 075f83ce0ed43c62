//! Turn qualification, label scores, attribution to the preceding AI turn,
//! and aggregation to conversation and user level.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, Corpus};
use crate::numeric::{mean, round6};
use crate::sentiment::{Backend, SentimentEngine, SentimentError, SentimentLabel};

/// extremely_negative → −1, negative → −0.5, neutral → 0, positive → 0.5,
/// extremely_positive → 1.
pub fn label_to_score(label: SentimentLabel) -> f64 {
    match label {
        SentimentLabel::ExtremelyNegative => -1.0,
        SentimentLabel::Negative => -0.5,
        SentimentLabel::Neutral => 0.0,
        SentimentLabel::Positive => 0.5,
        SentimentLabel::ExtremelyPositive => 1.0,
    }
}

/// User turns preceded by at least one AI turn, paired with the nearest
/// preceding AI turn index.
pub fn qualifying_turns(conv: &Conversation) -> Vec<(usize, usize)> {
    let mut last_ai = None;
    let mut out = Vec::new();
    for turn in &conv.turns {
        if turn.is_ai() {
            last_ai = Some(turn.idx);
        } else if let Some(ai) = last_ai {
            out.push((turn.idx, ai));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnAssessment {
    pub conversation_id: String,
    pub turn_idx: usize,
    pub attributed_ai_idx: usize,
    pub label: SentimentLabel,
    pub score: f64,
    pub refined: bool,
    pub backend: Backend,
}

impl TurnAssessment {
    pub fn key(&self) -> (&str, usize) {
        (&self.conversation_id, self.turn_idx)
    }
}

/// A qualifying turn the backend could not score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnscoredTurn {
    pub conversation_id: String,
    pub turn_idx: usize,
    pub attributed_ai_idx: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssessmentRun {
    pub assessments: Vec<TurnAssessment>,
    pub unscored: Vec<UnscoredTurn>,
}

impl AssessmentRun {
    pub fn is_complete(&self) -> bool {
        self.unscored.is_empty()
    }
}

struct Job<'a> {
    conv: &'a Conversation,
    turn_idx: usize,
    ai_idx: usize,
}

/// Classifies every qualifying turn. Backend failures are collected per turn
/// rather than aborting; both lists come back sorted by
/// (conversation_id, turn_idx) whatever order the workers finish in.
pub fn assess_corpus(corpus: &Corpus, engine: &SentimentEngine) -> AssessmentRun {
    let jobs: Vec<Job> = corpus
        .conversations()
        .iter()
        .flat_map(|conv| {
            qualifying_turns(conv)
                .into_iter()
                .map(move |(turn_idx, ai_idx)| Job {
                    conv,
                    turn_idx,
                    ai_idx,
                })
        })
        .collect();

    let results: Mutex<Vec<(usize, Result<TurnAssessment, SentimentError>)>> =
        Mutex::new(Vec::with_capacity(jobs.len()));
    let next = AtomicUsize::new(0);
    let workers = engine.concurrency().clamp(1, jobs.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let text = &job.conv.turn(job.turn_idx).expect("qualifying turn exists").text;
                    let outcome = engine.classify_with_refinement(text).map(|c| TurnAssessment {
                        conversation_id: job.conv.id.clone(),
                        turn_idx: job.turn_idx,
                        attributed_ai_idx: job.ai_idx,
                        label: c.label,
                        score: label_to_score(c.label),
                        refined: c.refined,
                        backend: c.backend,
                    });
                    local.push((i, outcome));
                }
                results.lock().expect("results lock").extend(local);
            });
        }
    });

    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    let mut run = AssessmentRun::default();
    for (i, outcome) in results {
        match outcome {
            Ok(a) => run.assessments.push(a),
            Err(e) => {
                let job = &jobs[i];
                run.unscored.push(UnscoredTurn {
                    conversation_id: job.conv.id.clone(),
                    turn_idx: job.turn_idx,
                    attributed_ai_idx: job.ai_idx,
                    error: e.to_string(),
                });
            }
        }
    }
    sort_assessments(&mut run.assessments);
    run.unscored
        .sort_by(|a, b| (&a.conversation_id, a.turn_idx).cmp(&(&b.conversation_id, b.turn_idx)));
    run
}

pub fn sort_assessments(assessments: &mut [TurnAssessment]) {
    assessments.sort_by(|a, b| a.key().cmp(&b.key()));
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversationScore {
    pub conversation_id: String,
    #[serde(serialize_with = "round6")]
    pub mean_score: f64,
    pub n_assessed: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("assessments mix conversations `{0}` and `{1}`")]
    MixedConversations(String, String),
    #[error("window start {start} is after end {end}")]
    InvalidWindow {
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
    #[error("assessment for unknown turn {conversation_id}#{turn_idx}")]
    UnknownTurn {
        conversation_id: String,
        turn_idx: usize,
    },
}

/// Mean score of one conversation's assessments; `None` when empty.
pub fn conversation_score(
    assessments: &[TurnAssessment],
) -> Result<Option<ConversationScore>, ScoringError> {
    let Some(first) = assessments.first() else {
        return Ok(None);
    };
    if let Some(other) = assessments.iter().find(|a| a.conversation_id != first.conversation_id) {
        return Err(ScoringError::MixedConversations(
            first.conversation_id.clone(),
            other.conversation_id.clone(),
        ));
    }
    let mut scores: Vec<f64> = assessments.iter().map(|a| a.score).collect();
    // order-independent summation
    scores.sort_by(f64::total_cmp);
    Ok(Some(ConversationScore {
        conversation_id: first.conversation_id.clone(),
        mean_score: mean(&scores).expect("non-empty"),
        n_assessed: scores.len(),
    }))
}

/// Scores for every conversation with at least one assessment, in
/// conversation id order.
pub fn conversation_scores(assessments: &[TurnAssessment]) -> Vec<ConversationScore> {
    let mut grouped: BTreeMap<&str, Vec<TurnAssessment>> = BTreeMap::new();
    for a in assessments {
        grouped.entry(&a.conversation_id).or_default().push(a.clone());
    }
    grouped
        .values()
        .filter_map(|g| conversation_score(g).expect("grouped by id"))
        .collect()
}

/// How per-user means are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserAggregation {
    /// Mean over all assessed turns.
    #[default]
    Turns,
    /// Mean of conversation means.
    Conversations,
}

impl FromStr for UserAggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "turns" => Ok(Self::Turns),
            "conversations" => Ok(Self::Conversations),
            _ => Err(format!("unknown aggregation `{s}` (expected turns or conversations)")),
        }
    }
}

/// Inclusive start, exclusive end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    #[serde(serialize_with = "crate::corpus::serialize_ts_opt")]
    pub start: Option<DateTime<Utc>>,
    #[serde(serialize_with = "crate::corpus::serialize_ts_opt")]
    pub end: Option<DateTime<Utc>>,
}

impl Window {
    pub const ALL: Window = Window {
        start: None,
        end: None,
    };

    pub fn new(start: Option<DateTime<Utc>>, end: Option<DateTime<Utc>>) -> Result<Self, ScoringError> {
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                return Err(ScoringError::InvalidWindow { start: s, end: e });
            }
        }
        Ok(Self { start, end })
    }

    pub fn before(end: DateTime<Utc>) -> Self {
        Self {
            start: None,
            end: Some(end),
        }
    }

    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        self.start.is_none_or(|s| ts >= s) && self.end.is_none_or(|e| ts < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserAggregate {
    pub user_id: String,
    #[serde(serialize_with = "round6")]
    pub mean_score: f64,
    pub n_assessed_turns: usize,
    pub n_conversations_assessed: usize,
    pub window: Window,
}

/// Index from conversation id to its conversation, built once per corpus.
pub struct CorpusIndex<'a> {
    by_id: BTreeMap<&'a str, &'a Conversation>,
}

impl<'a> CorpusIndex<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        Self {
            by_id: corpus.conversations().iter().map(|c| (c.id.as_str(), c)).collect(),
        }
    }

    pub fn conversation(&self, id: &str) -> Option<&'a Conversation> {
        self.by_id.get(id).copied()
    }

    pub fn turn_ts(&self, a: &TurnAssessment) -> Result<DateTime<Utc>, ScoringError> {
        self.conversation(&a.conversation_id)
            .and_then(|c| c.turn(a.turn_idx))
            .map(|t| t.ts)
            .ok_or_else(|| ScoringError::UnknownTurn {
                conversation_id: a.conversation_id.clone(),
                turn_idx: a.turn_idx,
            })
    }

    pub fn user_of(&self, a: &TurnAssessment) -> Option<&'a str> {
        self.conversation(&a.conversation_id).map(|c| c.user_id.as_str())
    }
}

/// Aggregates for every user with assessed turns inside `window`, sorted by
/// user id.
pub fn user_aggregates(
    assessments: &[TurnAssessment],
    corpus: &Corpus,
    window: Window,
    mode: UserAggregation,
) -> Result<Vec<UserAggregate>, ScoringError> {
    let index = CorpusIndex::new(corpus);
    let mut per_user: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for a in assessments {
        let ts = index.turn_ts(a)?;
        if !window.contains(ts) {
            continue;
        }
        let user = index.user_of(a).expect("turn_ts found the conversation");
        per_user
            .entry(user)
            .or_default()
            .entry(&a.conversation_id)
            .or_default()
            .push(a.score);
    }
    Ok(per_user
        .into_iter()
        .map(|(user, convs)| aggregate_one(user, convs, window, mode))
        .collect())
}

fn aggregate_one(
    user: &str,
    convs: BTreeMap<&str, Vec<f64>>,
    window: Window,
    mode: UserAggregation,
) -> UserAggregate {
    let n_turns = convs.values().map(Vec::len).sum();
    let mut values: Vec<f64> = match mode {
        UserAggregation::Turns => convs.values().flatten().copied().collect(),
        UserAggregation::Conversations => {
            convs.values().map(|s| mean(s).expect("non-empty group")).collect()
        }
    };
    values.sort_by(f64::total_cmp);
    UserAggregate {
        user_id: user.to_string(),
        mean_score: mean(&values).expect("user has assessments"),
        n_assessed_turns: n_turns,
        n_conversations_assessed: convs.len(),
        window,
    }
}

/// One user's aggregate; `None` for unknown users or an empty window.
pub fn user_aggregate(
    assessments: &[TurnAssessment],
    corpus: &Corpus,
    user_id: &str,
    window: Window,
    mode: UserAggregation,
) -> Result<Option<UserAggregate>, ScoringError> {
    let index = CorpusIndex::new(corpus);
    let mut mine = Vec::new();
    for a in assessments {
        if index.user_of(a) == Some(user_id) {
            mine.push(a.clone());
        }
    }
    Ok(user_aggregates(&mine, corpus, window, mode)?.into_iter().next())
}

/// Line-delimited assessment records in (conversation_id, turn_idx) order.
pub fn write_assessments<W: Write>(assessments: &[TurnAssessment], mut out: W) -> io::Result<()> {
    for a in assessments {
        serde_json::to_writer(&mut out, a)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_unscored<W: Write>(unscored: &[UnscoredTurn], mut out: W) -> io::Result<()> {
    for u in unscored {
        serde_json::to_writer(&mut out, u)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum AssessmentFileError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
}

/// Reads an assessment file, checking each score matches its label.
pub fn read_assessments<R: BufRead>(reader: R) -> Result<Vec<TurnAssessment>, AssessmentFileError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: TurnAssessment = serde_json::from_str(&line).map_err(|e| AssessmentFileError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        if a.score != label_to_score(a.label) {
            return Err(AssessmentFileError::Line {
                line: i + 1,
                message: format!("score {} does not match label {}", a.score, a.label),
            });
        }
        if a.attributed_ai_idx >= a.turn_idx {
            return Err(AssessmentFileError::Line {
                line: i + 1,
                message: "attributed_ai_idx must precede turn_idx".into(),
            });
        }
        out.push(a);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn assessment(conv: &str, turn: usize, label: SentimentLabel) -> TurnAssessment {
    TurnAssessment {
        conversation_id: conv.into(),
        turn_idx: turn,
        attributed_ai_idx: turn - 1,
        label,
        score: label_to_score(label),
        refined: false,
        backend: Backend::Lexicon,
    }
}

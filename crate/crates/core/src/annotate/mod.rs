//! Manual verification: rater sessions over a sampled set of turns, label
//! records, inter-rater agreement, and match rates against the automated
//! labels.

mod store;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analysis::SampleRef;
use crate::corpus::{Corpus, Turn};
use crate::numeric::round6;
use crate::scoring::TurnAssessment;
use crate::sentiment::Polarity;
use crate::stats::{cohen_kappa, StatsError};
use crate::Agreement;

pub use store::{AnnotationStore, StoreError};

/// Raters get this long per item before the UI highlights the timer. Never
/// enforced.
pub const ADVISORY_SECONDS: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanLabel {
    Satisfied,
    Unsatisfied,
    CannotJudge,
}

impl HumanLabel {
    pub const ALL: [HumanLabel; 3] = [
        HumanLabel::Satisfied,
        HumanLabel::Unsatisfied,
        HumanLabel::CannotJudge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HumanLabel::Satisfied => "satisfied",
            HumanLabel::Unsatisfied => "unsatisfied",
            HumanLabel::CannotJudge => "cannot_judge",
        }
    }

    /// The automated class this label counts as a match for.
    pub fn matching_class(self) -> Polarity {
        match self {
            HumanLabel::Satisfied => Polarity::Positive,
            HumanLabel::Unsatisfied => Polarity::Negative,
            HumanLabel::CannotJudge => Polarity::Neutral,
        }
    }
}

impl std::str::FromStr for HumanLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HumanLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label `{s}` (expected satisfied, unsatisfied or cannot_judge)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub session_id: String,
    pub sample_ref: SampleRef,
    pub rater_id: String,
    pub label: HumanLabel,
    /// Seconds the rater spent on the item.
    pub elapsed: f64,
    #[serde(with = "ts_format")]
    pub created_at: DateTime<Utc>,
    /// Set on corrections; the record replaces an earlier one for the same item.
    #[serde(default)]
    pub supersedes: bool,
}

mod ts_format {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationSession {
    pub id: String,
    pub rater_id: String,
    pub sample: Vec<SampleRef>,
    pub cursor: usize,
    pub status: SessionStatus,
}

impl AnnotationSession {
    pub fn current(&self) -> Option<&SampleRef> {
        self.sample.get(self.cursor)
    }
}

/// The target turn and the turns around it that a rater may expand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextBundle {
    pub session_id: String,
    pub sample_ref: SampleRef,
    pub position: usize,
    pub total: usize,
    pub target: Turn,
    pub previous_user: Option<Turn>,
    pub preceding_ai: Turn,
    pub following_ai: Option<Turn>,
    pub advisory_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotateError {
    #[error("cannot create a session from an empty sample")]
    EmptySample,
    #[error("rater id must not be empty")]
    EmptyRater,
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is complete")]
    SessionComplete(String),
    #[error("out of order: expected {expected:?}, got {got:?}")]
    OutOfOrder {
        expected: Option<SampleRef>,
        got: SampleRef,
    },
    #[error("{0:?} is already labeled; submit a correction instead")]
    AlreadyLabeled(SampleRef),
    #[error("{0:?} has not been labeled yet, so there is nothing to correct")]
    NotLabeled(SampleRef),
    #[error("elapsed time must be finite and non-negative, got {0}")]
    InvalidElapsed(f64),
    #[error("sample item {conversation_id}#{turn_idx} is not a qualifying turn in the corpus")]
    MissingContext {
        conversation_id: String,
        turn_idx: usize,
    },
    #[error("record sets cover different items ({} only in a, {} only in b)", only_a.len(), only_b.len())]
    Misaligned {
        only_a: Vec<SampleRef>,
        only_b: Vec<SampleRef>,
    },
    #[error("no assessment for annotated item {0:?}")]
    MissingAssessment(SampleRef),
    #[error("no records to compare")]
    NoRecords,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Builds the context bundle for one sampled turn.
pub fn context_bundle(
    corpus: &Corpus,
    session: &AnnotationSession,
    position: usize,
) -> Result<ContextBundle, AnnotateError> {
    let sample_ref = session.sample[position].clone();
    let missing = || AnnotateError::MissingContext {
        conversation_id: sample_ref.conversation_id.clone(),
        turn_idx: sample_ref.turn_idx,
    };
    let conv = corpus.get(&sample_ref.conversation_id).ok_or_else(missing)?;
    let target = conv.turn(sample_ref.turn_idx).filter(|t| t.is_user()).ok_or_else(missing)?;
    let preceding_ai = conv.turns[..sample_ref.turn_idx]
        .iter()
        .rev()
        .find(|t| t.is_ai())
        .ok_or_else(missing)?;
    let previous_user = conv.turns[..preceding_ai.idx].iter().rev().find(|t| t.is_user());
    let following_ai = conv.turns[sample_ref.turn_idx + 1..].iter().find(|t| t.is_ai());
    Ok(ContextBundle {
        session_id: session.id.clone(),
        position,
        total: session.sample.len(),
        target: target.clone(),
        previous_user: previous_user.cloned(),
        preceding_ai: preceding_ai.clone(),
        following_ai: following_ai.cloned(),
        advisory_seconds: ADVISORY_SECONDS,
        sample_ref,
    })
}

/// Latest record per item; corrections replace what they supersede.
pub fn effective_records(records: &[AnnotationRecord]) -> BTreeMap<SampleRef, &AnnotationRecord> {
    let mut out = BTreeMap::new();
    for r in records {
        out.insert(r.sample_ref.clone(), r);
    }
    out
}

fn align<'a>(
    a: &'a [AnnotationRecord],
    b: &'a [AnnotationRecord],
) -> Result<Vec<(HumanLabel, HumanLabel)>, AnnotateError> {
    let ea = effective_records(a);
    let eb = effective_records(b);
    let ka: BTreeSet<&SampleRef> = ea.keys().collect();
    let kb: BTreeSet<&SampleRef> = eb.keys().collect();
    if ka != kb {
        return Err(AnnotateError::Misaligned {
            only_a: ka.difference(&kb).map(|r| (*r).clone()).collect(),
            only_b: kb.difference(&ka).map(|r| (*r).clone()).collect(),
        });
    }
    if ka.is_empty() {
        return Err(AnnotateError::NoRecords);
    }
    Ok(ea.iter().map(|(k, r)| (r.label, eb[k].label)).collect())
}

/// Cohen's kappa between two raters over the same items.
pub fn agreement(
    records_a: &[AnnotationRecord],
    records_b: &[AnnotationRecord],
) -> Result<Agreement, AnnotateError> {
    let (la, lb): (Vec<_>, Vec<_>) = align(records_a, records_b)?.into_iter().unzip();
    Ok(cohen_kappa(&la, &lb)?)
}

/// Aligned label pairs as a two-column CSV, one row per item in sample-ref
/// order.
pub fn export_pairs(
    records_a: &[AnnotationRecord],
    records_b: &[AnnotationRecord],
    header: (&str, &str),
) -> Result<String, AnnotateError> {
    let pairs = align(records_a, records_b)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([header.0, header.1]).expect("in-memory write");
    for (a, b) in pairs {
        w.write_record([a.as_str(), b.as_str()]).expect("in-memory write");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii labels"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Automated neutral matches human cannot_judge.
    #[default]
    NeutralIsCannotJudge,
    /// cannot_judge records are dropped before comparing.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMatch {
    pub n: usize,
    pub matched: usize,
    #[serde(serialize_with = "round6")]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRate {
    pub mode: MatchMode,
    pub n: usize,
    pub matched: usize,
    #[serde(serialize_with = "round6")]
    pub overall: f64,
    /// Keyed by the automated class.
    pub per_class: BTreeMap<Polarity, ClassMatch>,
    pub excluded_cannot_judge: usize,
}

/// How often the automated label agrees with the resolved human label.
pub fn match_rate(
    assessments: &[TurnAssessment],
    resolved: &[AnnotationRecord],
    mode: MatchMode,
) -> Result<MatchRate, AnnotateError> {
    let by_ref: BTreeMap<(&str, usize), &TurnAssessment> =
        assessments.iter().map(|a| (a.key(), a)).collect();
    let mut per_class: BTreeMap<Polarity, ClassMatch> = BTreeMap::new();
    let mut excluded = 0;
    for (r, record) in effective_records(resolved) {
        let a = by_ref
            .get(&(r.conversation_id.as_str(), r.turn_idx))
            .ok_or_else(|| AnnotateError::MissingAssessment(r.clone()))?;
        if mode == MatchMode::Strict && record.label == HumanLabel::CannotJudge {
            excluded += 1;
            continue;
        }
        let class = a.label.polarity();
        let entry = per_class.entry(class).or_insert(ClassMatch {
            n: 0,
            matched: 0,
            rate: 0.0,
        });
        entry.n += 1;
        entry.matched += usize::from(record.label.matching_class() == class);
    }
    for c in per_class.values_mut() {
        c.rate = c.matched as f64 / c.n as f64;
    }
    let n: usize = per_class.values().map(|c| c.n).sum();
    if n == 0 {
        return Err(AnnotateError::NoRecords);
    }
    let matched = per_class.values().map(|c| c.matched).sum();
    Ok(MatchRate {
        mode,
        n,
        matched,
        overall: matched as f64 / n as f64,
        per_class,
        excluded_cannot_judge: excluded,
    })
}

/// Reads a line-delimited record file, e.g. a resolved label set.
pub fn read_records<R: std::io::BufRead>(reader: R) -> Result<Vec<AnnotationRecord>, StoreError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: "<records>".into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;

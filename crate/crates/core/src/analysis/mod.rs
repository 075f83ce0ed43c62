//! The report pipelines: coverage, agreement with explicit feedback, churn
//! association, conversation length by sentiment, triage flagging, and
//! sampling for manual annotation.

mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Corpus, Feedback};
use crate::numeric::{round6, round6_map, round6_opt};
use crate::scoring::{
    conversation_scores, qualifying_turns, user_aggregates, CorpusIndex, ScoringError,
    TurnAssessment, UserAggregation, Window,
};
use crate::sentiment::{Polarity, SentimentLabel};
use crate::stats::{chi_square_2x2_with, point_biserial, StatsError, Table2x2};
use crate::{Association, Correlation};

pub use report::{Report, ReportFormat, ReportKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("assessment references unknown conversation `{0}`")]
    UnknownConversation(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("insufficient overlap between thumbs and sentiment: {pairs} pairs, table {table:?}")]
    InsufficientOverlap { pairs: u64, table: Table2x2 },
    #[error("churn correlation undefined ({returning} returning, {non_returning} non-returning users): {source}")]
    DegenerateChurn {
        returning: usize,
        non_returning: usize,
        source: StatsError,
    },
    #[error("negative threshold {neg} exceeds positive threshold {pos}")]
    InvalidThresholds { neg: f64, pos: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub total_user_turns: usize,
    pub qualifying_turns: usize,
    /// First turns and other user turns with no preceding AI turn.
    pub non_qualifying_turns: usize,
    pub assessed_turns: usize,
    /// Qualifying turns without an assessment (backend failures).
    pub unscored_turns: usize,
    #[serde(serialize_with = "round6")]
    pub qualifying_fraction: f64,
    /// Label counts as a fraction of all user turns.
    #[serde(serialize_with = "round6_map")]
    pub turn_label_proportions: BTreeMap<SentimentLabel, f64>,
    pub conversations_total: usize,
    pub conversations_assessed: usize,
    #[serde(serialize_with = "round6")]
    pub conversations_assessed_fraction: f64,
    pub explicit_feedback_turns: usize,
    pub explicit_feedback_conversations: usize,
    /// Thumbs as a fraction of all user turns.
    #[serde(serialize_with = "round6")]
    pub explicit_feedback_turn_fraction: f64,
    #[serde(serialize_with = "round6")]
    pub explicit_feedback_conversation_fraction: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_known(corpus: &Corpus, assessments: &[TurnAssessment]) -> Result<(), AnalysisError> {
    let index = CorpusIndex::new(corpus);
    for a in assessments {
        if index.conversation(&a.conversation_id).is_none() {
            return Err(AnalysisError::UnknownConversation(a.conversation_id.clone()));
        }
        index.turn_ts(a)?;
    }
    Ok(())
}

pub fn coverage_report(
    corpus: &Corpus,
    assessments: &[TurnAssessment],
) -> Result<CoverageReport, AnalysisError> {
    check_known(corpus, assessments)?;
    let total_user_turns = corpus.user_turn_count();
    let qualifying: usize = corpus.conversations().iter().map(|c| qualifying_turns(c).len()).sum();
    let mut label_counts: BTreeMap<SentimentLabel, usize> =
        SentimentLabel::ALL.iter().map(|l| (*l, 0)).collect();
    for a in assessments {
        *label_counts.get_mut(&a.label).expect("all labels present") += 1;
    }
    let assessed_conversations: BTreeSet<&str> =
        assessments.iter().map(|a| a.conversation_id.as_str()).collect();
    let mut feedback_turns = 0;
    let mut feedback_conversations = 0;
    for conv in corpus.conversations() {
        let n = conv.turns.iter().filter(|t| t.is_ai() && t.feedback.is_some()).count();
        feedback_turns += n;
        feedback_conversations += usize::from(n > 0);
    }
    let conversations_total = corpus.len();
    Ok(CoverageReport {
        total_user_turns,
        qualifying_turns: qualifying,
        non_qualifying_turns: total_user_turns - qualifying,
        assessed_turns: assessments.len(),
        unscored_turns: qualifying.saturating_sub(assessments.len()),
        qualifying_fraction: ratio(qualifying, total_user_turns),
        turn_label_proportions: label_counts
            .into_iter()
            .map(|(l, n)| (l, ratio(n, total_user_turns)))
            .collect(),
        conversations_total,
        conversations_assessed: assessed_conversations.len(),
        conversations_assessed_fraction: ratio(assessed_conversations.len(), conversations_total),
        explicit_feedback_turns: feedback_turns,
        explicit_feedback_conversations: feedback_conversations,
        explicit_feedback_turn_fraction: ratio(feedback_turns, total_user_turns),
        explicit_feedback_conversation_fraction: ratio(feedback_conversations, conversations_total),
    })
}

/// Thumbs paired with the sign of the reaction that followed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedbackPair {
    pub conversation_id: String,
    pub ai_idx: usize,
    pub turn_idx: usize,
    pub thumbs_up: bool,
    pub sentiment_positive: bool,
}

/// Pairs each thumbed AI turn with its earliest non-neutral attributing
/// assessment.
pub fn feedback_pairs(corpus: &Corpus, assessments: &[TurnAssessment]) -> Vec<FeedbackPair> {
    let mut earliest: HashMap<(&str, usize), &TurnAssessment> = HashMap::new();
    for a in assessments.iter().filter(|a| a.score != 0.0) {
        let key = (a.conversation_id.as_str(), a.attributed_ai_idx);
        let slot = earliest.entry(key).or_insert(a);
        if a.turn_idx < slot.turn_idx {
            *slot = a;
        }
    }
    let mut pairs = Vec::new();
    for conv in corpus.conversations() {
        for turn in conv.turns.iter().filter(|t| t.is_ai()) {
            let thumbs_up = match turn.feedback {
                Feedback::Up => true,
                Feedback::Down => false,
                Feedback::None => continue,
            };
            if let Some(a) = earliest.get(&(conv.id.as_str(), turn.idx)) {
                pairs.push(FeedbackPair {
                    conversation_id: conv.id.clone(),
                    ai_idx: turn.idx,
                    turn_idx: a.turn_idx,
                    thumbs_up,
                    sentiment_positive: a.score > 0.0,
                });
            }
        }
    }
    pairs
}

/// Rows are thumbs (up, down); columns are sentiment sign (positive, negative).
pub fn feedback_table(pairs: &[FeedbackPair]) -> Table2x2 {
    let mut table = [[0u64; 2]; 2];
    for p in pairs {
        table[usize::from(!p.thumbs_up)][usize::from(!p.sentiment_positive)] += 1;
    }
    table
}

/// Chi-square association between thumbs direction and sentiment sign.
pub fn explicit_feedback_comparison(
    corpus: &Corpus,
    assessments: &[TurnAssessment],
    yates: bool,
) -> Result<Association, AnalysisError> {
    let pairs = feedback_pairs(corpus, assessments);
    let table = feedback_table(&pairs);
    let n = pairs.len() as u64;
    if n < 2 {
        return Err(AnalysisError::InsufficientOverlap { pairs: n, table });
    }
    chi_square_2x2_with(table, yates)
        .map_err(|_| AnalysisError::InsufficientOverlap { pairs: n, table })
}

/// Minimum, quartiles (linear interpolation) and maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiveNumber {
    pub n: usize,
    #[serde(serialize_with = "round6")]
    pub min: f64,
    #[serde(serialize_with = "round6")]
    pub q1: f64,
    #[serde(serialize_with = "round6")]
    pub median: f64,
    #[serde(serialize_with = "round6")]
    pub q3: f64,
    #[serde(serialize_with = "round6")]
    pub max: f64,
    #[serde(serialize_with = "round6")]
    pub mean: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: crate::numeric::mean(&v).expect("non-empty"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChurnUser {
    pub user_id: String,
    #[serde(serialize_with = "round6")]
    pub initial_mean_score: f64,
    pub did_return: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChurnReport {
    #[serde(serialize_with = "crate::corpus::serialize_ts")]
    pub boundary: DateTime<Utc>,
    pub initial_window: Window,
    pub aggregation: UserAggregation,
    pub per_user: Vec<ChurnUser>,
    pub correlation: Correlation,
    pub returning: Option<FiveNumber>,
    pub non_returning: Option<FiveNumber>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChurnOptions {
    pub boundary: DateTime<Utc>,
    /// Start of the initial period; `None` takes everything before the boundary.
    pub initial_start: Option<DateTime<Utc>>,
    pub aggregation: UserAggregation,
}

impl ChurnOptions {
    pub fn new(boundary: DateTime<Utc>) -> Self {
        Self {
            boundary,
            initial_start: None,
            aggregation: UserAggregation::Turns,
        }
    }
}

/// Users with at least one user turn at or after `boundary`.
pub fn returning_users(corpus: &Corpus, boundary: DateTime<Utc>) -> BTreeSet<&str> {
    corpus
        .conversations()
        .iter()
        .filter(|c| c.user_turns().any(|t| t.ts >= boundary))
        .map(|c| c.user_id.as_str())
        .collect()
}

pub fn churn_analysis(
    corpus: &Corpus,
    assessments: &[TurnAssessment],
    options: ChurnOptions,
) -> Result<ChurnReport, AnalysisError> {
    check_known(corpus, assessments)?;
    let window = Window::new(options.initial_start, Some(options.boundary))?;
    let aggregates = user_aggregates(assessments, corpus, window, options.aggregation)?;
    let returned = returning_users(corpus, options.boundary);
    let per_user: Vec<ChurnUser> = aggregates
        .into_iter()
        .map(|agg| ChurnUser {
            did_return: returned.contains(agg.user_id.as_str()),
            initial_mean_score: agg.mean_score,
            user_id: agg.user_id,
        })
        .collect();
    let flags: Vec<bool> = per_user.iter().map(|u| u.did_return).collect();
    let scores: Vec<f64> = per_user.iter().map(|u| u.initial_mean_score).collect();
    let returning = flags.iter().filter(|&&f| f).count();
    let correlation = point_biserial(&flags, &scores).map_err(|source| AnalysisError::DegenerateChurn {
        returning,
        non_returning: flags.len() - returning,
        source,
    })?;
    let group = |flag: bool| {
        let v: Vec<f64> = per_user.iter().filter(|u| u.did_return == flag).map(|u| u.initial_mean_score).collect();
        FiveNumber::of(&v)
    };
    Ok(ChurnReport {
        boundary: options.boundary,
        initial_window: window,
        aggregation: options.aggregation,
        returning: group(true),
        non_returning: group(false),
        per_user,
        correlation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthGroup {
    pub n_conversations: usize,
    #[serde(serialize_with = "round6")]
    pub mean_turns: f64,
    pub summary: FiveNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    /// Only groups with at least one conversation appear.
    pub groups: BTreeMap<Polarity, LengthGroup>,
}

impl LengthReport {
    pub fn mean_turns(&self, group: Polarity) -> Option<f64> {
        self.groups.get(&group).map(|g| g.mean_turns)
    }
}

/// Conversation length (all turns) grouped by the sign of each assessed
/// conversation's mean score.
pub fn length_by_sentiment(
    corpus: &Corpus,
    assessments: &[TurnAssessment],
) -> Result<LengthReport, AnalysisError> {
    check_known(corpus, assessments)?;
    let index = CorpusIndex::new(corpus);
    let mut lengths: BTreeMap<Polarity, Vec<f64>> = BTreeMap::new();
    for score in conversation_scores(assessments) {
        let conv = index
            .conversation(&score.conversation_id)
            .expect("checked above");
        let group = if score.mean_score < 0.0 {
            Polarity::Negative
        } else if score.mean_score > 0.0 {
            Polarity::Positive
        } else {
            Polarity::Neutral
        };
        lengths.entry(group).or_default().push(conv.turns.len() as f64);
    }
    let groups = lengths
        .into_iter()
        .map(|(g, v)| {
            let summary = FiveNumber::of(&v).expect("groups are non-empty");
            (
                g,
                LengthGroup {
                    n_conversations: v.len(),
                    mean_turns: summary.mean,
                    summary,
                },
            )
        })
        .collect();
    Ok(LengthReport { groups })
}

/// Assessments at or beyond either threshold, strongest first.
pub fn flag_salient(
    assessments: &[TurnAssessment],
    neg_threshold: f64,
    pos_threshold: f64,
) -> Result<Vec<TurnAssessment>, AnalysisError> {
    if neg_threshold > pos_threshold {
        return Err(AnalysisError::InvalidThresholds {
            neg: neg_threshold,
            pos: pos_threshold,
        });
    }
    let mut flagged: Vec<TurnAssessment> = assessments
        .iter()
        .filter(|a| a.score <= neg_threshold || a.score >= pos_threshold)
        .cloned()
        .collect();
    flagged.sort_by(|a, b| {
        b.score
            .abs()
            .total_cmp(&a.score.abs())
            .then_with(|| a.key().cmp(&b.key()))
    });
    Ok(flagged)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, serde::Deserialize)]
pub struct SampleRef {
    pub conversation_id: String,
    pub turn_idx: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleItem {
    #[serde(flatten)]
    pub sample_ref: SampleRef,
    pub class: Polarity,
    pub label: SentimentLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationSample {
    pub seed: u64,
    pub n_per_class: usize,
    pub items: Vec<SampleItem>,
    /// Classes with fewer members than requested, and by how many.
    pub shortfall: BTreeMap<Polarity, usize>,
}

impl AnnotationSample {
    pub fn refs(&self) -> Vec<SampleRef> {
        self.items.iter().map(|i| i.sample_ref.clone()).collect()
    }
}

/// Draws up to `n_per_class` assessments from each of the negative, neutral
/// and positive classes without replacement, then shuffles the combined
/// sample so raters do not see items grouped by class.
pub fn sample_for_annotation(
    assessments: &[TurnAssessment],
    n_per_class: usize,
    seed: u64,
) -> AnnotationSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<Polarity, Vec<&TurnAssessment>> = BTreeMap::new();
    for a in assessments {
        by_class.entry(a.label.polarity()).or_default().push(a);
    }
    let mut items = Vec::new();
    let mut shortfall = BTreeMap::new();
    for class in Polarity::ALL {
        let mut members = by_class.remove(&class).unwrap_or_default();
        members.sort_by(|a, b| a.key().cmp(&b.key()));
        if members.len() < n_per_class {
            shortfall.insert(class, n_per_class - members.len());
        }
        let take = n_per_class.min(members.len());
        for a in members.choose_multiple(&mut rng, take) {
            items.push(SampleItem {
                sample_ref: SampleRef {
                    conversation_id: a.conversation_id.clone(),
                    turn_idx: a.turn_idx,
                },
                class,
                label: a.label,
            });
        }
    }
    items.shuffle(&mut rng);
    AnnotationSample {
        seed,
        n_per_class,
        items,
        shortfall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserMean {
    pub user_id: String,
    #[serde(serialize_with = "round6")]
    pub mean_score: f64,
    pub n_assessed_turns: usize,
}

/// Mean score for every user with at least one assessment.
pub fn per_user_distribution(
    assessments: &[TurnAssessment],
    corpus: &Corpus,
    aggregation: UserAggregation,
) -> Result<Vec<UserMean>, AnalysisError> {
    check_known(corpus, assessments)?;
    Ok(user_aggregates(assessments, corpus, Window::ALL, aggregation)?
        .into_iter()
        .map(|a| UserMean {
            user_id: a.user_id,
            mean_score: a.mean_score,
            n_assessed_turns: a.n_assessed_turns,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerUserReport {
    pub aggregation: UserAggregation,
    pub users: Vec<UserMean>,
    #[serde(serialize_with = "round6_opt")]
    pub mean_of_means: Option<f64>,
}

pub fn per_user_report(
    assessments: &[TurnAssessment],
    corpus: &Corpus,
    aggregation: UserAggregation,
) -> Result<PerUserReport, AnalysisError> {
    let users = per_user_distribution(assessments, corpus, aggregation)?;
    let means: Vec<f64> = users.iter().map(|u| u.mean_score).collect();
    Ok(PerUserReport {
        aggregation,
        mean_of_means: crate::numeric::mean(&means),
        users,
    })
}

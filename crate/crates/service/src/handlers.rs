use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ppulse::analysis::{
    churn_analysis, coverage_report, explicit_feedback_comparison, length_by_sentiment,
    per_user_report, sample_for_annotation, ChurnOptions, ReportKind, SampleRef,
};
use ppulse::annotate::{agreement as kappa, HumanLabel};
use ppulse::corpus::{parse_ts, Author, Conversation, Feedback};
use ppulse::numeric::round6_opt;
use ppulse::scoring::{TurnAssessment, UserAggregation};
use ppulse::sentiment::{Backend, SentimentLabel};

use crate::{ApiError, AppState, LIST_TEXT_LIMIT};

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = State<Arc<AppState>>;

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    b.map(|Json(t)| t).map_err(|e| match e {
        JsonRejection::JsonDataError(_) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.body_text())
        }
        _ => ApiError::bad_request(e.body_text()),
    })
}

fn timestamp(raw: Option<&str>, name: &str) -> Result<Option<DateTime<Utc>>, ApiError> {
    raw.map(|r| parse_ts(r).ok_or_else(|| ApiError::bad_request(format!("`{name}` is not an RFC 3339 timestamp: {r}"))))
        .transpose()
}

pub async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

#[derive(Serialize)]
pub struct Summary {
    conversations: usize,
    users: usize,
    user_turns: usize,
    assessments: usize,
    refined: usize,
    label_counts: BTreeMap<SentimentLabel, usize>,
    backends: BTreeMap<&'static str, usize>,
    coverage: ppulse::analysis::CoverageReport,
    annotation_sessions: usize,
}

pub async fn summary(State(state): Shared) -> ApiResult<Summary> {
    let a = state.assessments();
    let mut label_counts: BTreeMap<SentimentLabel, usize> =
        SentimentLabel::ALL.iter().map(|l| (*l, 0)).collect();
    let mut backends = BTreeMap::new();
    for x in a {
        *label_counts.entry(x.label).or_default() += 1;
        let name = match x.backend {
            Backend::Lexicon => "lexicon",
            Backend::Remote => "remote",
        };
        *backends.entry(name).or_default() += 1;
    }
    Ok(Json(Summary {
        conversations: state.corpus().len(),
        users: state.corpus().user_ids().len(),
        user_turns: state.corpus().user_turn_count(),
        assessments: a.len(),
        refined: a.iter().filter(|x| x.refined).count(),
        label_counts,
        backends,
        coverage: coverage_report(state.corpus(), a)?,
        annotation_sessions: state.store().sessions().len(),
    }))
}

#[derive(Serialize)]
struct AssessmentView {
    label: SentimentLabel,
    score: f64,
    refined: bool,
    attributed_ai_idx: usize,
}

impl From<&TurnAssessment> for AssessmentView {
    fn from(a: &TurnAssessment) -> Self {
        Self {
            label: a.label,
            score: a.score,
            refined: a.refined,
            attributed_ai_idx: a.attributed_ai_idx,
        }
    }
}

#[derive(Serialize)]
struct TurnView {
    idx: usize,
    author: Author,
    ts: String,
    text: String,
    truncated: bool,
    feedback: Feedback,
    assessment: Option<AssessmentView>,
}

#[derive(Serialize)]
pub struct ConversationView {
    id: String,
    user_id: String,
    started_at: Option<String>,
    n_turns: usize,
    #[serde(serialize_with = "round6_opt")]
    mean_score: Option<f64>,
    n_assessed: usize,
    turns: Vec<TurnView>,
}

fn conversation_view(state: &AppState, conv: &Conversation, text_limit: Option<usize>) -> ConversationView {
    let score = state.scores.get(&conv.id);
    let turns = conv
        .turns
        .iter()
        .map(|t| {
            let (text, truncated) = match text_limit {
                Some(limit) if t.text.chars().count() > limit => {
                    (t.text.chars().take(limit).collect(), true)
                }
                _ => (t.text.clone(), false),
            };
            TurnView {
                idx: t.idx,
                author: t.author,
                ts: ppulse::corpus::format_ts(&t.ts),
                text,
                truncated,
                feedback: t.feedback,
                assessment: state.assessment_for(&conv.id, t.idx).map(AssessmentView::from),
            }
        })
        .collect();
    ConversationView {
        id: conv.id.clone(),
        user_id: conv.user_id.clone(),
        started_at: conv.started_at().map(|t| ppulse::corpus::format_ts(&t)),
        n_turns: conv.turns.len(),
        mean_score: score.map(|s| s.mean_score),
        n_assessed: score.map_or(0, |s| s.n_assessed),
        turns,
    }
}

#[derive(Deserialize)]
pub struct ListQuery {
    sentiment: Option<String>,
    min_abs_score: Option<f64>,
    page: Option<usize>,
    page_size: Option<usize>,
}

#[derive(Serialize)]
pub struct ConversationPage {
    page: usize,
    page_size: usize,
    total: usize,
    items: Vec<ConversationView>,
}

/// Conversations ordered by strength of sentiment, strongest first; those
/// without any assessed turn come last and only appear unfiltered.
pub async fn list_conversations(
    State(state): Shared,
    q: Result<Query<ListQuery>, QueryRejection>,
) -> ApiResult<ConversationPage> {
    let q = query(q)?;
    let sign: Option<Ordering> = match q.sentiment.as_deref() {
        None => None,
        Some("neg") => Some(Ordering::Less),
        Some("neu") => Some(Ordering::Equal),
        Some("pos") => Some(Ordering::Greater),
        Some(other) => return Err(ApiError::bad_request(format!("sentiment must be neg, neu or pos, got `{other}`"))),
    };
    let min_abs = q.min_abs_score.unwrap_or(0.0);
    if !min_abs.is_finite() || min_abs < 0.0 {
        return Err(ApiError::bad_request("min_abs_score must be a non-negative number"));
    }
    let page = q.page.unwrap_or(1);
    let page_size = q.page_size.unwrap_or(20);
    if page == 0 || !(1..=200).contains(&page_size) {
        return Err(ApiError::bad_request("page starts at 1 and page_size must be 1..=200"));
    }
    let filtered = sign.is_some() || q.min_abs_score.is_some();
    let mut rows: Vec<(&Conversation, Option<f64>)> = state
        .corpus()
        .conversations()
        .iter()
        .map(|c| (c, state.scores.get(&c.id).map(|s| s.mean_score)))
        .filter(|(_, score)| match score {
            None => !filtered,
            Some(s) => sign.is_none_or(|o| s.partial_cmp(&0.0) == Some(o)) && s.abs() >= min_abs,
        })
        .collect();
    rows.sort_by(|(ca, sa), (cb, sb)| match (sa, sb) {
        (Some(a), Some(b)) => b.abs().total_cmp(&a.abs()).then_with(|| ca.id.cmp(&cb.id)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => ca.id.cmp(&cb.id),
    });
    let total = rows.len();
    let items = rows
        .into_iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .map(|(c, _)| conversation_view(&state, c, Some(LIST_TEXT_LIMIT)))
        .collect();
    Ok(Json(ConversationPage {
        page,
        page_size,
        total,
        items,
    }))
}

pub async fn get_conversation(State(state): Shared, Path(id): Path<String>) -> ApiResult<ConversationView> {
    let conv = state
        .corpus()
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown conversation `{id}`")))?;
    Ok(Json(conversation_view(&state, conv, None)))
}

#[derive(Deserialize)]
pub struct ReportQuery {
    boundary: Option<String>,
    initial_start: Option<String>,
    aggregation: Option<String>,
    #[serde(default)]
    yates: bool,
}

pub async fn report(
    State(state): Shared,
    Path(kind): Path<String>,
    q: Result<Query<ReportQuery>, QueryRejection>,
) -> ApiResult<Value> {
    let kind: ReportKind = kind.parse().map_err(ApiError::not_found)?;
    let q = query(q)?;
    let aggregation: UserAggregation = match q.aggregation.as_deref() {
        None => UserAggregation::default(),
        Some(raw) => raw.parse().map_err(|e: String| ApiError::bad_request(e))?,
    };
    let corpus = state.corpus();
    let a = state.assessments();
    let to_value = |v: Result<Value, serde_json::Error>| {
        v.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
    };
    let value = match kind {
        ReportKind::Coverage => to_value(serde_json::to_value(coverage_report(corpus, a)?))?,
        ReportKind::Precision => {
            to_value(serde_json::to_value(explicit_feedback_comparison(corpus, a, q.yates)?))?
        }
        ReportKind::Churn => {
            let boundary = timestamp(q.boundary.as_deref(), "boundary")?
                .ok_or_else(|| ApiError::bad_request("the churn report needs `boundary`"))?;
            let options = ChurnOptions {
                boundary,
                initial_start: timestamp(q.initial_start.as_deref(), "initial_start")?,
                aggregation,
            };
            to_value(serde_json::to_value(churn_analysis(corpus, a, options)?))?
        }
        ReportKind::Length => to_value(serde_json::to_value(length_by_sentiment(corpus, a)?))?,
        ReportKind::PerUser => to_value(serde_json::to_value(per_user_report(a, corpus, aggregation)?))?,
    };
    Ok(Json(value))
}

pub async fn list_sessions(State(state): Shared) -> ApiResult<Value> {
    Ok(Json(json!({ "sessions": state.store().sessions() })))
}

pub async fn get_session(State(state): Shared, Path(id): Path<String>) -> ApiResult<Value> {
    Ok(Json(json!({ "session": state.store().session(&id)? })))
}

#[derive(Deserialize)]
pub struct CreateSession {
    rater_id: String,
    per_class: usize,
    seed: u64,
}

pub async fn create_session(
    State(state): Shared,
    b: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req = body(b)?;
    let sample = sample_for_annotation(state.assessments(), req.per_class, req.seed);
    let refs = sample.refs();
    let session = {
        let state = Arc::clone(&state);
        let rater = req.rater_id.clone();
        tokio::task::spawn_blocking(move || state.store().create_session(&refs, &rater))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??
    };
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session": session, "shortfall": sample.shortfall })),
    ))
}

pub async fn next_item(State(state): Shared, Path(id): Path<String>) -> ApiResult<Value> {
    let session = state.store().session(&id)?;
    let item = state.store().next_item(&id, state.corpus())?;
    Ok(Json(json!({ "session": session, "item": item })))
}

#[derive(Deserialize)]
pub struct LabelRequest {
    sample_ref: SampleRef,
    label: String,
    elapsed: f64,
    #[serde(default)]
    correction: bool,
}

pub async fn record_label(
    State(state): Shared,
    Path(id): Path<String>,
    b: Result<Json<LabelRequest>, JsonRejection>,
) -> ApiResult<Value> {
    let req = body(b)?;
    let label: HumanLabel = req
        .label
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_label", e))?;
    let st = Arc::clone(&state);
    let session_id = id.clone();
    let record = tokio::task::spawn_blocking(move || {
        let store = st.store();
        if req.correction {
            store.correct_label(&session_id, &req.sample_ref, label, req.elapsed)
        } else {
            store.record_label(&session_id, &req.sample_ref, label, req.elapsed)
        }
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let session = state.store().session(&id)?;
    Ok(Json(json!({ "record": record, "session": session })))
}

#[derive(Deserialize)]
pub struct AgreementQuery {
    rater_a: String,
    rater_b: String,
}

pub async fn agreement(
    State(state): Shared,
    q: Result<Query<AgreementQuery>, QueryRejection>,
) -> ApiResult<Value> {
    let q = query(q)?;
    let records_a = state.store().rater_records(&q.rater_a);
    let records_b = state.store().rater_records(&q.rater_b);
    for (rater, records) in [(&q.rater_a, &records_a), (&q.rater_b, &records_b)] {
        if records.is_empty() {
            return Err(ApiError::not_found(format!("rater `{rater}` has no records")));
        }
    }
    let result = kappa(&records_a, &records_b)?;
    Ok(Json(json!({
        "rater_a": q.rater_a,
        "rater_b": q.rater_b,
        "agreement": result,
    })))
}

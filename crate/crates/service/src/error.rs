use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use ppulse::analysis::AnalysisError;
use ppulse::annotate::{AnnotateError, StoreError};

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self }))).into_response()
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        let message = e.to_string();
        match e {
            AnalysisError::InsufficientOverlap { pairs, table } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_overlap", message)
                    .with_details(json!({ "pairs": pairs, "table": table }))
            }
            AnalysisError::DegenerateChurn {
                returning,
                non_returning,
                ..
            } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "degenerate_groups", message)
                .with_details(json!({ "returning": returning, "non_returning": non_returning })),
            AnalysisError::InvalidThresholds { .. } => ApiError::bad_request(message),
            AnalysisError::UnknownConversation(_) | AnalysisError::Scoring(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        }
    }
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        let message = e.to_string();
        let conflict = |code| ApiError::new(StatusCode::CONFLICT, code, message.clone());
        let unprocessable = |code| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.clone());
        match e {
            AnnotateError::UnknownSession(_) => ApiError::not_found(message),
            AnnotateError::OutOfOrder { expected, got } => {
                conflict("out_of_order").with_details(json!({ "expected": expected, "got": got }))
            }
            AnnotateError::AlreadyLabeled(_) => conflict("already_labeled"),
            AnnotateError::NotLabeled(_) => conflict("not_labeled"),
            AnnotateError::SessionComplete(_) => conflict("session_complete"),
            AnnotateError::EmptySample => unprocessable("empty_sample"),
            AnnotateError::EmptyRater => unprocessable("empty_rater"),
            AnnotateError::InvalidElapsed(_) => unprocessable("invalid_elapsed"),
            AnnotateError::Misaligned { only_a, only_b } => unprocessable("misaligned")
                .with_details(json!({ "only_a": only_a, "only_b": only_b })),
            AnnotateError::NoRecords => unprocessable("no_records"),
            AnnotateError::Stats(_) => unprocessable("degenerate_labels"),
            AnnotateError::MissingAssessment(_) | AnnotateError::MissingContext { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Annotate(a) => a.into(),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", other.to_string()),
        }
    }
}

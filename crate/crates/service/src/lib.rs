//! Read-mostly HTTP API over an analyzed corpus, plus the annotation
//! endpoints. Corpus and assessments are loaded once and never change while
//! the server runs; only the annotation store is written.

mod error;
mod handlers;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

use ppulse::analysis::{coverage_report, AnalysisError};
use ppulse::annotate::AnnotationStore;
use ppulse::corpus::Corpus;
use ppulse::scoring::{conversation_scores, ConversationScore, TurnAssessment};

pub use error::ApiError;

/// Turn text longer than this is cut in list responses.
pub const LIST_TEXT_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, Default)]
pub struct ServiceConfig {
    /// Send permissive CORS headers, for a UI served from another origin.
    pub cors: bool,
}

pub struct AppState {
    corpus: Corpus,
    assessments: Vec<TurnAssessment>,
    store: AnnotationStore,
    scores: BTreeMap<String, ConversationScore>,
    by_turn: BTreeMap<(String, usize), usize>,
}

impl AppState {
    /// Fails if any assessment points outside the corpus.
    pub fn new(
        corpus: Corpus,
        assessments: Vec<TurnAssessment>,
        store: AnnotationStore,
    ) -> Result<Self, AnalysisError> {
        coverage_report(&corpus, &assessments)?;
        let scores = conversation_scores(&assessments)
            .into_iter()
            .map(|s| (s.conversation_id.clone(), s))
            .collect();
        let by_turn = assessments
            .iter()
            .enumerate()
            .map(|(i, a)| ((a.conversation_id.clone(), a.turn_idx), i))
            .collect();
        Ok(Self {
            corpus,
            assessments,
            store,
            scores,
            by_turn,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn assessments(&self) -> &[TurnAssessment] {
        &self.assessments
    }

    pub fn store(&self) -> &AnnotationStore {
        &self.store
    }

    fn assessment_for(&self, conversation_id: &str, turn_idx: usize) -> Option<&TurnAssessment> {
        self.by_turn
            .get(&(conversation_id.to_string(), turn_idx))
            .map(|&i| &self.assessments[i])
    }
}

pub fn router(state: Arc<AppState>, config: ServiceConfig) -> Router {
    let api = Router::new()
        .route("/api/summary", get(handlers::summary))
        .route("/api/conversations", get(handlers::list_conversations))
        .route("/api/conversations/{id}", get(handlers::get_conversation))
        .route("/api/reports/{kind}", get(handlers::report))
        .route(
            "/api/annotation/sessions",
            get(handlers::list_sessions).post(handlers::create_session),
        )
        .route("/api/annotation/sessions/{id}", get(handlers::get_session))
        .route("/api/annotation/sessions/{id}/next", get(handlers::next_item))
        .route("/api/annotation/sessions/{id}/labels", post(handlers::record_label))
        .route("/api/annotation/agreement", get(handlers::agreement))
        .fallback(handlers::not_found)
        .with_state(state);
    if config.cors {
        api.layer(CorsLayer::permissive())
    } else {
        api
    }
}

/// Binds `addr` and serves until the process receives ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState, config: ServiceConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(state), config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Serves on an already-bound listener; the caller owns shutdown.
pub async fn serve_on(listener: TcpListener, state: Arc<AppState>, config: ServiceConfig) -> std::io::Result<()> {
    axum::serve(listener, router(state, config)).await
}

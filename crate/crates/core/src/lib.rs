//! Mines implicit developer-satisfaction signals from AI assistant chat logs.
//!
//! Each user turn that follows an AI turn is classified on a five-point
//! sentiment scale, scored in {−1, −0.5, 0, 0.5, 1}, and attributed to the AI
//! turn it reacts to. Scores are then aggregated per conversation and user
//! and checked against explicit thumbs feedback, human annotation, and
//! whether users came back.

pub mod analysis;
pub mod annotate;
pub mod corpus;
pub mod numeric;
pub mod scoring;
pub mod sentiment;
pub mod stats;

pub use numeric::Scalar;

/// Statistical results at the precision the pipeline runs in.
pub type Association = stats::AssociationResult<f64>;
pub type Correlation = stats::CorrelationResult<f64>;
pub type Agreement = stats::AgreementResult<f64>;
pub type Association32 = stats::AssociationResult<f32>;
pub type Correlation32 = stats::CorrelationResult<f32>;
pub type Agreement32 = stats::AgreementResult<f32>;

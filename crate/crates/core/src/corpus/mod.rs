//! Conversation data model, corpus files, and the synthetic generator.

mod generator;
mod io;
mod model;
mod templates;

pub use generator::{
    generate_synthetic, generate_with_truth, GeneratorParams, GroundTruth, InvalidParams,
    LengthProfile, PlantedTurn, PlantedUser, Rendering, SyntheticCorpus, CALIBRATED_CHURN_LINK,
    DEFAULT_SENTIMENT_MIX, TURN_SPACING_SECS,
};
pub use io::{
    conversation_to_line, corpus_to_string, parse_corpus, parse_line, parse_ts, write_corpus,
    LineError, ParseError, ParseOptions,
};
pub use model::{
    format_ts, split_periods, validate_conversation, Author, Conversation, Corpus, CorpusError,
    CorpusMeta, Feedback, Rule, Turn, Violation,
};
pub(crate) use model::{serialize_ts, serialize_ts_opt};
pub use templates::{parse_pool, TemplatePools};

#[cfg(test)]
pub(crate) use model::test_support;

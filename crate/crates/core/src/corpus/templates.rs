//! Text pools the generator draws turn texts from.

use crate::sentiment::SentimentLabel;

const EXTREMELY_NEGATIVE: &str = include_str!("../../fixtures/templates/extremely_negative.txt");
const NEGATIVE: &str = include_str!("../../fixtures/templates/negative.txt");
const NEUTRAL: &str = include_str!("../../fixtures/templates/neutral.txt");
const POSITIVE: &str = include_str!("../../fixtures/templates/positive.txt");
const EXTREMELY_POSITIVE: &str = include_str!("../../fixtures/templates/extremely_positive.txt");
const ERROR_LOG: &str = include_str!("../../fixtures/templates/error_log.txt");
const NEGATIVE_WITH_LOG: &str = include_str!("../../fixtures/templates/negative_with_log.txt");
const OPENING: &str = include_str!("../../fixtures/templates/opening.txt");
const AI_REPLY: &str = include_str!("../../fixtures/templates/ai_reply.txt");

/// Parses a pool file: one template per line, `#` comments, `\n` escapes.
pub fn parse_pool(raw: &str) -> Vec<String> {
    raw.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.replace("\\n", "\n").replace("\\t", "\t"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TemplatePools {
    /// Plain human-written follow-ups, indexed like [`SentimentLabel::ALL`].
    pub by_label: [Vec<String>; 5],
    /// Pasted logs that the lexicon alone reads as negative.
    pub error_log: Vec<String>,
    /// Negative remark plus pasted log.
    pub negative_with_log: Vec<String>,
    pub opening: Vec<String>,
    pub ai_reply: Vec<String>,
}

impl TemplatePools {
    pub fn bundled() -> Self {
        Self {
            by_label: [
                parse_pool(EXTREMELY_NEGATIVE),
                parse_pool(NEGATIVE),
                parse_pool(NEUTRAL),
                parse_pool(POSITIVE),
                parse_pool(EXTREMELY_POSITIVE),
            ],
            error_log: parse_pool(ERROR_LOG),
            negative_with_log: parse_pool(NEGATIVE_WITH_LOG),
            opening: parse_pool(OPENING),
            ai_reply: parse_pool(AI_REPLY),
        }
    }

    pub fn for_label(&self, label: SentimentLabel) -> &[String] {
        &self.by_label[label.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentiment::{detect_error_log, lexicon_classify, MessageKind, SentimentEngine};

    #[test]
    fn every_plain_template_classifies_as_its_label() {
        let pools = TemplatePools::bundled();
        let engine = SentimentEngine::lexicon_only();
        for label in SentimentLabel::ALL {
            assert!(!pools.for_label(label).is_empty());
            for t in pools.for_label(label) {
                assert_eq!(lexicon_classify(t).label, label, "{t:?}");
                let refined = engine.classify_with_refinement(t).unwrap();
                assert_eq!(refined.label, label, "{t:?}");
                assert!(!refined.refined, "false refinement on {t:?}");
            }
        }
    }

    #[test]
    fn error_logs_are_negative_but_all_log_lines() {
        let pools = TemplatePools::bundled();
        for t in &pools.error_log {
            assert!(lexicon_classify(t).label.is_negative(), "{t:?}");
            assert_eq!(detect_error_log(t).classification, MessageKind::ErrorMessageOnly, "{t:?}");
        }
    }

    #[test]
    fn mixed_logs_keep_a_negative_human_part() {
        let pools = TemplatePools::bundled();
        for t in &pools.negative_with_log {
            let sep = detect_error_log(t);
            assert_eq!(sep.classification, MessageKind::MixedMessage, "{t:?}");
            assert_eq!(lexicon_classify(&sep.human_text).label, SentimentLabel::Negative, "{t:?}");
        }
    }

    #[test]
    fn escapes_and_comments() {
        assert_eq!(parse_pool("# c\na\\nb\n\nc"), vec!["a\nb".to_string(), "c".to_string()]);
    }
}

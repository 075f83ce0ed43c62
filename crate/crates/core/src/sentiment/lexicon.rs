//! Deterministic rule-based classifier used as the offline backend.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

use once_cell::sync::Lazy;

use super::{Backend, ClassificationResult, SentimentLabel};

// Longest phrase first so "does not work" wins over shorter overlaps.
const NEGATIVE_PHRASES: [&[&str]; 7] = [
    &["does", "not", "work"],
    &["doesn't", "work"],
    &["not", "working"],
    &["still", "broken"],
    &["still", "fails"],
    &["didn't", "work"],
    &["still", "not"],
];

const NEGATIVE_WORDS: [&str; 12] = [
    "wrong", "broken", "useless", "terrible", "awful", "bad", "fail", "failed", "fails", "worse",
    "incorrect", "annoying",
];

const POSITIVE_WORDS: [&str; 12] = [
    "thanks", "thank", "great", "perfect", "awesome", "excellent", "nice", "works", "worked",
    "fixed", "helpful", "good",
];

const STRONG_POSITIVE: [&str; 6] = ["great", "perfect", "awesome", "excellent", "amazing", "brilliant"];

static DEFAULT_PROFANITY: &str = include_str!("../../fixtures/profanity.txt");

static DEFAULT_LEXICON: Lazy<Lexicon> = Lazy::new(Lexicon::default);

/// Splits on anything that is not alphanumeric or an apostrophe, lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .map(|t| t.replace('\u{2019}', "'"))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_negator(token: &str) -> bool {
    token == "not" || token.ends_with("n't")
}

/// Word lists plus the profanity markers that push a negative result to the
/// extreme label.
#[derive(Debug, Clone)]
pub struct Lexicon {
    profanity: HashSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::with_profanity(parse_word_list(DEFAULT_PROFANITY))
    }
}

fn parse_word_list(raw: &str) -> Vec<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Tally of what the rules matched in one text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconHits {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub strong: Vec<String>,
    pub intensity: Vec<String>,
}

impl LexiconHits {
    pub fn polarity(&self) -> i64 {
        self.positive.len() as i64 - self.negative.len() as i64
    }

    pub fn label(&self) -> SentimentLabel {
        match self.polarity() {
            0 => SentimentLabel::Neutral,
            p if p > 0 && !self.strong.is_empty() => SentimentLabel::ExtremelyPositive,
            p if p > 0 => SentimentLabel::Positive,
            _ if !self.intensity.is_empty() => SentimentLabel::ExtremelyNegative,
            _ => SentimentLabel::Negative,
        }
    }

    fn rationale(&self) -> String {
        format!(
            "lexicon polarity {:+}; positive [{}]; negative [{}]; strong [{}]; intensity [{}]",
            self.polarity(),
            self.positive.join(", "),
            self.negative.join(", "),
            self.strong.join(", "),
            self.intensity.join(", "),
        )
    }
}

impl Lexicon {
    pub fn with_profanity<I: IntoIterator<Item = String>>(words: I) -> Self {
        Self {
            profanity: words.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    /// Loads the profanity list from a file with one word per line.
    pub fn from_profanity_file(path: &Path) -> io::Result<Self> {
        Ok(Self::with_profanity(parse_word_list(&fs::read_to_string(path)?)))
    }

    pub fn hits(&self, text: &str) -> LexiconHits {
        let tokens = tokenize(text);
        let mut consumed = vec![false; tokens.len()];
        let mut hits = LexiconHits::default();

        for phrase in NEGATIVE_PHRASES {
            let len = phrase.len();
            for i in 0..tokens.len().saturating_sub(len - 1) {
                let span = i..i + len;
                if consumed[span.clone()].iter().any(|&c| c) {
                    continue;
                }
                if tokens[span.clone()].iter().zip(phrase.iter()).all(|(t, p)| t == p) {
                    consumed[span].iter_mut().for_each(|c| *c = true);
                    hits.negative.push(phrase.join(" "));
                }
            }
        }
        for (i, token) in tokens.iter().enumerate() {
            if self.profanity.contains(token) {
                hits.intensity.push(token.clone());
            }
            if consumed[i] {
                continue;
            }
            let t = token.as_str();
            let negated = tokens[i.saturating_sub(2)..i].iter().any(|p| is_negator(p));
            if NEGATIVE_WORDS.contains(&t) {
                hits.negative.push(token.clone());
            } else if POSITIVE_WORDS.contains(&t) {
                if negated {
                    hits.negative.push(format!("not {t}"));
                } else {
                    hits.positive.push(token.clone());
                }
            }
            if STRONG_POSITIVE.contains(&t) && !negated {
                hits.strong.push(token.clone());
            }
        }
        if text.contains("!!!") {
            hits.intensity.insert(0, "!!!".into());
        }
        hits
    }

    pub fn classify(&self, text: &str) -> ClassificationResult {
        let hits = self.hits(text);
        ClassificationResult {
            label: hits.label(),
            initial_label: hits.label(),
            rationale: hits.rationale(),
            backend: Backend::Lexicon,
            refined: false,
        }
    }
}

/// Classifies with the bundled lexicon.
pub fn lexicon_classify(text: &str) -> ClassificationResult {
    DEFAULT_LEXICON.classify(text)
}

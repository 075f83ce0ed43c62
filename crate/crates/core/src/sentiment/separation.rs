//! Heuristic separation of pasted machine output (stack traces, compiler
//! diagnostics, runtime exceptions) from human-written text.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    ErrorMessageOnly,
    HumanMessageOnly,
    MixedMessage,
}

impl MessageKind {
    pub const ALL: [MessageKind; 3] = [
        MessageKind::ErrorMessageOnly,
        MessageKind::HumanMessageOnly,
        MessageKind::MixedMessage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::ErrorMessageOnly => "error_message_only",
            MessageKind::HumanMessageOnly => "human_message_only",
            MessageKind::MixedMessage => "mixed_message",
        }
    }
}

/// How a separation result was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationSource {
    Heuristic,
    Remote,
    /// The remote response could not be parsed; the heuristic answered instead.
    HeuristicFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeparationResult {
    pub classification: MessageKind,
    pub human_text: String,
    pub source: SeparationSource,
}

/// Which rule made a line log-like.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineRule {
    JavaFrame,
    PythonTraceback,
    PythonFrame,
    PathLine,
    ErrorKeyword,
    FrameMarker,
    Symbolic,
}

static JAVA_FRAME: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^at\s+[\w$<>]+(?:\.[\w$<>]+)+\s*\(").expect("valid regex"));
static PATH_LINE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"[\w\-~]*[./\\][\w.\-/\\]*:\d+(?::\d+)?\b").expect("valid regex")
});
static FRAME_MARKER: Lazy<Regex> = Lazy::new(|| Regex::new(r"^#\d").expect("valid regex"));

const ERROR_KEYWORDS: [&str; 4] = ["Exception", "error:", "Error:", "ERROR"];

/// Returns the first rule a line matches, if any. Leading and trailing
/// whitespace is ignored.
pub fn log_line_rule(line: &str) -> Option<LineRule> {
    let line = line.trim();
    if line.is_empty() {
        return None;
    }
    if JAVA_FRAME.is_match(line) {
        return Some(LineRule::JavaFrame);
    }
    if line.contains("Traceback (most recent call last)") {
        return Some(LineRule::PythonTraceback);
    }
    if line.starts_with("File \"") {
        return Some(LineRule::PythonFrame);
    }
    if PATH_LINE.is_match(line) {
        return Some(LineRule::PathLine);
    }
    if ERROR_KEYWORDS.iter().any(|k| line.contains(k)) {
        return Some(LineRule::ErrorKeyword);
    }
    if FRAME_MARKER.is_match(line) {
        return Some(LineRule::FrameMarker);
    }
    let total = line.chars().count();
    if total >= 20 {
        let non_letters = line.chars().filter(|c| !c.is_alphabetic()).count();
        if non_letters * 5 >= total * 3 {
            return Some(LineRule::Symbolic);
        }
    }
    None
}

pub fn is_log_line(line: &str) -> bool {
    log_line_rule(line).is_some()
}

/// Classifies every non-empty line and keeps the human ones.
pub fn detect_error_log(text: &str) -> SeparationResult {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let human: Vec<&str> = lines.iter().copied().filter(|l| !is_log_line(l)).collect();
    let (classification, human_text) = if human.len() == lines.len() {
        (MessageKind::HumanMessageOnly, text.to_string())
    } else if human.is_empty() {
        (MessageKind::ErrorMessageOnly, String::new())
    } else {
        (MessageKind::MixedMessage, human.join("\n"))
    };
    SeparationResult {
        classification,
        human_text,
        source: SeparationSource::Heuristic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn java_trace_is_error_only() {
        let text = "Exception in thread \"main\" java.lang.NullPointerException\n    at com.example.Foo.bar(Foo.java:42)";
        let r = detect_error_log(text);
        assert_eq!(r.classification, MessageKind::ErrorMessageOnly);
        assert_eq!(r.human_text, "");
    }

    #[test]
    fn python_trace_with_question_is_mixed() {
        let text = "why does this fail?\nTraceback (most recent call last):\n  File \"x.py\", line 3";
        let r = detect_error_log(text);
        assert_eq!(r.classification, MessageKind::MixedMessage);
        assert_eq!(r.human_text, "why does this fail?");
    }

    #[test]
    fn plain_request_is_human_only() {
        let r = detect_error_log("please add a unit test");
        assert_eq!(r.classification, MessageKind::HumanMessageOnly);
        assert_eq!(r.human_text, "please add a unit test");
    }

    #[test]
    fn each_line_rule_fires() {
        let cases = [
            ("at org.junit.Assert.fail(Assert.java:89)", LineRule::JavaFrame),
            ("Traceback (most recent call last):", LineRule::PythonTraceback),
            ("File \"main.py\", line 7, in run", LineRule::PythonFrame),
            ("  --> src/main.rs:12:5", LineRule::PathLine),
            ("TypeError: undefined is not a function", LineRule::ErrorKeyword),
            ("2024-01-01 ERROR pool exhausted", LineRule::ErrorKeyword),
            ("#3 frame in libc start", LineRule::FrameMarker),
            ("0x7ffd 0x0000 0x0001 0x0002 == [[ ]]", LineRule::Symbolic),
        ];
        for (line, rule) in cases {
            assert_eq!(log_line_rule(line), Some(rule), "{line}");
        }
    }

    #[test]
    fn ordinary_prose_is_not_log_like() {
        for line in [
            "at least it compiles now",
            "meet me at 10:30 to review",
            "can you explain the error message?",
            "# Heading for the README",
            "1 2 3",
        ] {
            assert_eq!(log_line_rule(line), None, "{line}");
        }
    }

    #[test]
    fn whitespace_does_not_change_classification() {
        let text = "this is wrong\nat a.b.C.d(C.java:1)";
        let padded = format!("\n  {text}  \n\n");
        assert_eq!(detect_error_log(text), detect_error_log(&padded));
    }
}

//! Line-delimited corpus files: one conversation object per line.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use chrono::{DateTime, Timelike, Utc};
use serde_json::{Map, Value};

use super::model::{
    validate_conversation, Author, Conversation, Corpus, CorpusMeta, Feedback, Turn, Violation,
};

const CONVERSATION_FIELDS: [&str; 3] = ["id", "user_id", "turns"];
const TURN_FIELDS: [&str; 5] = ["idx", "author", "ts", "text", "feedback"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// Ignore unknown fields instead of rejecting them.
    pub lenient: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: {kind}")]
    Line { line: usize, kind: LineError },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug)]
pub enum LineError {
    Json(String),
    Field { field: String, message: String },
    UnknownField { field: String },
    DuplicateId { id: String, first_line: usize },
    Invalid { id: String, violations: Vec<Violation> },
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineError::Json(msg) => write!(f, "invalid JSON: {msg}"),
            LineError::Field { field, message } => write!(f, "field `{field}`: {message}"),
            LineError::UnknownField { field } => write!(f, "field `{field}`: unknown field"),
            LineError::DuplicateId { id, first_line } => {
                write!(f, "duplicate conversation id `{id}` (first seen on line {first_line})")
            }
            LineError::Invalid { id, violations } => {
                write!(f, "conversation `{id}` is invalid: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> LineError {
    LineError::Field {
        field: field.into(),
        message: message.into(),
    }
}

/// Parses a line-delimited corpus. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(
    reader: R,
    source: &str,
    options: ParseOptions,
) -> Result<Corpus, ParseError> {
    let mut conversations = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let conv = parse_line(&line, options).map_err(|kind| ParseError::Line {
            line: line_no,
            kind,
        })?;
        if let Some(&first_line) = seen.get(&conv.id) {
            return Err(ParseError::Line {
                line: line_no,
                kind: LineError::DuplicateId {
                    id: conv.id,
                    first_line,
                },
            });
        }
        let violations = validate_conversation(&conv);
        if !violations.is_empty() {
            return Err(ParseError::Line {
                line: line_no,
                kind: LineError::Invalid {
                    id: conv.id,
                    violations,
                },
            });
        }
        seen.insert(conv.id.clone(), line_no);
        conversations.push(conv);
    }
    let meta = CorpusMeta::Ingested {
        source: source.to_string(),
        lenient: options.lenient,
    };
    Ok(Corpus::new(conversations, meta).expect("ids checked while parsing"))
}

/// Parses one conversation record.
pub fn parse_line(line: &str, options: ParseOptions) -> Result<Conversation, LineError> {
    let value: Value = serde_json::from_str(line).map_err(|e| LineError::Json(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| field_err("<root>", "expected an object"))?;
    check_fields(obj, &CONVERSATION_FIELDS, "", options)?;
    let id = string_field(obj, "id", "id")?;
    let user_id = string_field(obj, "user_id", "user_id")?;
    let turns = obj
        .get("turns")
        .ok_or_else(|| field_err("turns", "missing"))?
        .as_array()
        .ok_or_else(|| field_err("turns", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, t)| parse_turn(t, i, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Conversation { id, user_id, turns })
}

fn check_fields(
    obj: &Map<String, Value>,
    known: &[&str],
    prefix: &str,
    options: ParseOptions,
) -> Result<(), LineError> {
    if options.lenient {
        return Ok(());
    }
    // report unknown fields in a stable order
    let mut unknown: Vec<&String> = obj.keys().filter(|k| !known.contains(&k.as_str())).collect();
    unknown.sort();
    match unknown.first() {
        Some(k) => Err(LineError::UnknownField {
            field: format!("{prefix}{k}"),
        }),
        None => Ok(()),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str, path: &str) -> Result<String, LineError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(field_err(path, "expected a string")),
        None => Err(field_err(path, "missing")),
    }
}

fn parse_turn(value: &Value, pos: usize, options: ParseOptions) -> Result<Turn, LineError> {
    let prefix = format!("turns[{pos}].");
    let path = |k: &str| format!("{prefix}{k}");
    let obj = value
        .as_object()
        .ok_or_else(|| field_err(format!("turns[{pos}]"), "expected an object"))?;
    check_fields(obj, &TURN_FIELDS, &prefix, options)?;
    let idx = match obj.get("idx") {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| field_err(path("idx"), "expected a non-negative integer"))?
            as usize,
        None => return Err(field_err(path("idx"), "missing")),
    };
    let author = match string_field(obj, "author", &path("author"))?.as_str() {
        "user" => Author::User,
        "ai" => Author::Ai,
        _ => return Err(field_err(path("author"), "expected \"user\" or \"ai\"")),
    };
    let ts_raw = string_field(obj, "ts", &path("ts"))?;
    let ts = parse_ts(&ts_raw).ok_or_else(|| field_err(path("ts"), "expected an RFC 3339 timestamp"))?;
    let text = string_field(obj, "text", &path("text"))?;
    let feedback = match obj.get("feedback") {
        None | Some(Value::Null) => Feedback::None,
        Some(Value::String(s)) if s == "up" => Feedback::Up,
        Some(Value::String(s)) if s == "down" => Feedback::Down,
        Some(_) => return Err(field_err(path("feedback"), "expected \"up\", \"down\" or null")),
    };
    Ok(Turn {
        idx,
        author,
        ts,
        text,
        feedback,
    })
}

/// Parses an RFC 3339 timestamp, normalizing to UTC at second resolution.
pub fn parse_ts(raw: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw)
        .ok()
        .and_then(|t| t.with_timezone(&Utc).with_nanosecond(0))
}

/// Canonical single-line encoding of a conversation.
pub fn conversation_to_line(conv: &Conversation) -> String {
    serde_json::to_string(conv).expect("conversation serializes")
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> io::Result<()> {
    for conv in corpus.conversations() {
        out.write_all(conversation_to_line(conv).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 output")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Corpus, ParseError> {
        parse_corpus(s.as_bytes(), "test", ParseOptions::default())
    }

    const HELLO: &str = r#"{"id":"c1","user_id":"u1","turns":[{"idx":0,"author":"user","ts":"2025-03-10T09:00:00Z","text":"hi","feedback":null},{"idx":1,"author":"ai","ts":"2025-03-10T09:01:00Z","text":"hello","feedback":"up"}]}"#;

    #[test]
    fn one_line_round_trips() {
        let corpus = parse(HELLO).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.conversations()[0].turns.len(), 2);
        assert_eq!(corpus.conversations()[0].turns[1].feedback, Feedback::Up);
        assert_eq!(corpus_to_string(&corpus), format!("{HELLO}\n"));
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn ai_first_turn_is_rejected() {
        let line = HELLO.replacen("\"author\":\"user\"", "\"author\":\"ai\"", 1);
        let err = parse(&line).unwrap_err().to_string();
        assert!(err.contains("first turn must be user"), "{err}");
        assert!(err.starts_with("line 1:"), "{err}");
    }

    #[test]
    fn malformed_field_names_line_and_field() {
        let bad = HELLO.replace("\"author\":\"ai\"", "\"author\":\"bot\"");
        let input = format!("{HELLO}\n{}", bad.replace("c1", "c2"));
        let err = parse(&input).unwrap_err().to_string();
        assert_eq!(err, "line 2: field `turns[1].author`: expected \"user\" or \"ai\"");
        let err = parse("{not json").unwrap_err().to_string();
        assert!(err.starts_with("line 1: invalid JSON"), "{err}");
        let missing = HELLO.replace("\"user_id\":\"u1\",", "");
        assert_eq!(parse(&missing).unwrap_err().to_string(), "line 1: field `user_id`: missing");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = parse(&format!("{HELLO}\n{HELLO}")).unwrap_err().to_string();
        assert!(err.contains("duplicate conversation id `c1`"), "{err}");
    }

    #[test]
    fn unknown_fields_depend_on_mode() {
        let extra = HELLO.replacen("\"text\":\"hi\"", "\"text\":\"hi\",\"lang\":\"en\"", 1);
        let err = parse(&extra).unwrap_err().to_string();
        assert_eq!(err, "line 1: field `turns[0].lang`: unknown field");
        let lenient = parse_corpus(extra.as_bytes(), "t", ParseOptions { lenient: true }).unwrap();
        assert_eq!(corpus_to_string(&lenient), format!("{HELLO}\n"));
    }

    #[test]
    fn timestamps_normalize_to_utc_seconds() {
        let ts = parse_ts("2025-03-10T10:00:00.750+01:00").unwrap();
        assert_eq!(super::super::model::format_ts(&ts), "2025-03-10T09:00:00Z");
        assert!(parse_ts("yesterday").is_none());
    }

    #[test]
    fn violations_are_listed() {
        let line = HELLO
            .replacen("\"feedback\":null", "\"feedback\":\"down\"", 1)
            .replace("\"idx\":1", "\"idx\":3");
        let err = parse(&line).unwrap_err().to_string();
        assert!(err.contains("turn 0: feedback on user turn"), "{err}");
        assert!(err.contains("turn 3: non-consecutive idx"), "{err}");
    }
}

//! Session persistence. Each session is one append-only JSONL file: a header
//! line describing the session, then one line per label record. Opening a
//! directory replays every file to rebuild session state.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use super::{
    context_bundle, AnnotateError, AnnotationRecord, AnnotationSession, ContextBundle, HumanLabel,
    SessionStatus,
};
use crate::analysis::SampleRef;
use crate::corpus::Corpus;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error("annotation store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{path}: line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogLine {
    Session {
        id: String,
        rater_id: String,
        sample: Vec<SampleRef>,
    },
    Label(AnnotationRecord),
}

struct SessionState {
    session: AnnotationSession,
    records: Vec<AnnotationRecord>,
    log: Option<File>,
}

impl SessionState {
    fn new(id: String, rater_id: String, sample: Vec<SampleRef>) -> Self {
        Self {
            session: AnnotationSession {
                id,
                rater_id,
                sample,
                cursor: 0,
                status: SessionStatus::Open,
            },
            records: Vec::new(),
            log: None,
        }
    }

    /// Validates a record against the current state and applies it.
    fn apply(&mut self, record: AnnotationRecord) -> Result<(), AnnotateError> {
        self.check(&record.sample_ref, record.supersedes)?;
        if !record.supersedes {
            self.session.cursor += 1;
            if self.session.cursor == self.session.sample.len() {
                self.session.status = SessionStatus::Complete;
            }
        }
        self.records.push(record);
        Ok(())
    }

    fn check(&self, sample_ref: &SampleRef, correction: bool) -> Result<(), AnnotateError> {
        let labeled = self.session.sample[..self.session.cursor].contains(sample_ref);
        if correction {
            return if labeled {
                Ok(())
            } else {
                Err(AnnotateError::NotLabeled(sample_ref.clone()))
            };
        }
        if labeled {
            return Err(AnnotateError::AlreadyLabeled(sample_ref.clone()));
        }
        match self.session.current() {
            None => Err(AnnotateError::SessionComplete(self.session.id.clone())),
            Some(expected) if expected == sample_ref => Ok(()),
            Some(expected) => Err(AnnotateError::OutOfOrder {
                expected: Some(expected.clone()),
                got: sample_ref.clone(),
            }),
        }
    }

    fn append(&mut self, line: &LogLine) -> io::Result<()> {
        if let Some(file) = self.log.as_mut() {
            let mut buf = serde_json::to_vec(line).map_err(io::Error::other)?;
            buf.push(b'\n');
            file.write_all(&buf)?;
            file.flush()?;
        }
        Ok(())
    }
}

struct Inner {
    sessions: BTreeMap<String, Arc<Mutex<SessionState>>>,
    next_id: u64,
}

/// Holds all annotation sessions. Sessions are independent: writes to one
/// session are serialized by its own lock and never block another.
pub struct AnnotationStore {
    dir: Option<PathBuf>,
    inner: RwLock<Inner>,
}

impl AnnotationStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            inner: RwLock::new(Inner {
                sessions: BTreeMap::new(),
                next_id: 1,
            }),
        }
    }

    /// Opens (creating if needed) a store directory and replays its logs.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        let mut sessions = BTreeMap::new();
        let mut next_id = 1;
        for path in paths {
            let (mut state, good_len) = replay(&path)?;
            if let Some(n) = state.session.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                next_id = next_id.max(n + 1);
            }
            let file = OpenOptions::new().append(true).open(&path)?;
            if file.metadata()?.len() > good_len {
                file.set_len(good_len)?;
            }
            state.log = Some(file);
            sessions.insert(state.session.id.clone(), Arc::new(Mutex::new(state)));
        }
        Ok(Self {
            dir: Some(dir),
            inner: RwLock::new(Inner { sessions, next_id }),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn create_session(
        &self,
        sample: &[SampleRef],
        rater_id: &str,
    ) -> Result<AnnotationSession, StoreError> {
        if sample.is_empty() {
            return Err(AnnotateError::EmptySample.into());
        }
        if rater_id.trim().is_empty() {
            return Err(AnnotateError::EmptyRater.into());
        }
        let mut inner = self.inner.write().expect("store lock poisoned");
        let id = format!("s{:04}", inner.next_id);
        let mut state = SessionState::new(id.clone(), rater_id.to_string(), sample.to_vec());
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{id}.jsonl"));
            state.log = Some(OpenOptions::new().create_new(true).append(true).open(path)?);
        }
        state.append(&LogLine::Session {
            id: id.clone(),
            rater_id: rater_id.to_string(),
            sample: sample.to_vec(),
        })?;
        inner.next_id += 1;
        let session = state.session.clone();
        inner.sessions.insert(id, Arc::new(Mutex::new(state)));
        Ok(session)
    }

    fn state(&self, id: &str) -> Result<Arc<Mutex<SessionState>>, AnnotateError> {
        self.inner
            .read()
            .expect("store lock poisoned")
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| AnnotateError::UnknownSession(id.to_string()))
    }

    pub fn session(&self, id: &str) -> Result<AnnotationSession, AnnotateError> {
        Ok(self.state(id)?.lock().expect("session lock poisoned").session.clone())
    }

    /// All sessions in id order.
    pub fn sessions(&self) -> Vec<AnnotationSession> {
        let handles: Vec<_> = self
            .inner
            .read()
            .expect("store lock poisoned")
            .sessions
            .values()
            .cloned()
            .collect();
        handles
            .iter()
            .map(|s| s.lock().expect("session lock poisoned").session.clone())
            .collect()
    }

    /// Context for the item at the cursor; `None` once the session is complete.
    pub fn next_item(&self, id: &str, corpus: &Corpus) -> Result<Option<ContextBundle>, AnnotateError> {
        let session = self.session(id)?;
        if session.status == SessionStatus::Complete {
            return Ok(None);
        }
        context_bundle(corpus, &session, session.cursor).map(Some)
    }

    pub fn record_label(
        &self,
        id: &str,
        sample_ref: &SampleRef,
        label: HumanLabel,
        elapsed: f64,
    ) -> Result<AnnotationRecord, StoreError> {
        self.write_record(id, sample_ref, label, elapsed, false, Utc::now())
    }

    /// Records a superseding label for an item that was already labeled.
    pub fn correct_label(
        &self,
        id: &str,
        sample_ref: &SampleRef,
        label: HumanLabel,
        elapsed: f64,
    ) -> Result<AnnotationRecord, StoreError> {
        self.write_record(id, sample_ref, label, elapsed, true, Utc::now())
    }

    pub(crate) fn write_record(
        &self,
        id: &str,
        sample_ref: &SampleRef,
        label: HumanLabel,
        elapsed: f64,
        supersedes: bool,
        now: DateTime<Utc>,
    ) -> Result<AnnotationRecord, StoreError> {
        if !elapsed.is_finite() || elapsed < 0.0 {
            return Err(AnnotateError::InvalidElapsed(elapsed).into());
        }
        let handle = self.state(id)?;
        let mut state = handle.lock().expect("session lock poisoned");
        state.check(sample_ref, supersedes)?;
        let record = AnnotationRecord {
            session_id: id.to_string(),
            sample_ref: sample_ref.clone(),
            rater_id: state.session.rater_id.clone(),
            label,
            elapsed,
            // the log keeps milliseconds; match it so replay is exact
            created_at: now.trunc_subsecs(3),
            supersedes,
        };
        // persist first so memory never runs ahead of the log
        state.append(&LogLine::Label(record.clone()))?;
        state.apply(record.clone())?;
        Ok(record)
    }

    /// Every record of one session in log order.
    pub fn records(&self, id: &str) -> Result<Vec<AnnotationRecord>, AnnotateError> {
        Ok(self.state(id)?.lock().expect("session lock poisoned").records.clone())
    }

    /// Records from all of a rater's sessions, in session then log order.
    pub fn rater_records(&self, rater_id: &str) -> Vec<AnnotationRecord> {
        let handles: Vec<_> = self
            .inner
            .read()
            .expect("store lock poisoned")
            .sessions
            .values()
            .cloned()
            .collect();
        let mut out = Vec::new();
        for h in handles {
            let s = h.lock().expect("session lock poisoned");
            if s.session.rater_id == rater_id {
                out.extend(s.records.iter().cloned());
            }
        }
        out
    }
}

/// Rebuilds a session from its log. Also returns the byte length of the
/// well-formed prefix.
fn replay(path: &Path) -> Result<(SessionState, u64), StoreError> {
    let name = path.display().to_string();
    let corrupt = |line: usize, message: String| StoreError::Corrupt {
        path: name.clone(),
        line,
        message,
    };
    let mut reader = BufReader::new(File::open(path)?);
    let mut state: Option<SessionState> = None;
    let mut buf = String::new();
    let mut line_no = 0;
    let mut good_len = 0u64;
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        // each record is written with its newline in one call, so a missing
        // newline means the final write was torn by a crash
        if !buf.ends_with('\n') {
            break;
        }
        let text = buf.trim_end();
        if text.is_empty() {
            good_len += n as u64;
            continue;
        }
        let parsed: LogLine =
            serde_json::from_str(text).map_err(|e| corrupt(line_no, e.to_string()))?;
        match (parsed, state.as_mut()) {
            (LogLine::Session { id, rater_id, sample }, None) => {
                state = Some(SessionState::new(id, rater_id, sample));
            }
            (LogLine::Label(record), Some(s)) => {
                s.apply(record).map_err(|e| corrupt(line_no, e.to_string()))?;
            }
            (LogLine::Session { .. }, Some(_)) => {
                return Err(corrupt(line_no, "second session header".into()))
            }
            (LogLine::Label(_), None) => {
                return Err(corrupt(line_no, "label before session header".into()))
            }
        }
        good_len += n as u64;
    }
    let state = state.ok_or_else(|| corrupt(0, "missing session header".into()))?;
    Ok((state, good_len))
}

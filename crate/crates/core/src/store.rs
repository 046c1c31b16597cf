//! Append-only storage of session- and turn-level records.
//!
//! Records are never rewritten. A session update or a turn that gains a
//! rating, suggestions, a caregiver reply or an annotation is appended again
//! as a new version; [`LoadedLog::snapshot`] keeps the latest version of each.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::FailureMode;
use crate::prompt::DialogueTurn;
use crate::scenario::ScenarioConfig;
use crate::session::{BackgroundSurvey, CaregiverAction, CaregiverMode, EndReason, RealismRating, SessionId};
use crate::strategy::StrategySuggestionSet;
use crate::utterance::PatientUtterance;

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const TURNS_FILE: &str = "turns.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub simulation_index: u32,
    pub scenario: ScenarioConfig,
    pub max_turns: u32,
    pub started_at: DateTime<Utc>,
    #[serde(default)]
    pub ended_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub end_reason: Option<EndReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: SessionId,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub survey: Option<BackgroundSurvey>,
    #[serde(default)]
    pub simulations: Vec<SimulationRecord>,
}

impl SessionRecord {
    pub fn simulation(&self, index: u32) -> Option<&SimulationRecord> {
        self.simulations.iter().find(|s| s.simulation_index == index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnTimestamps {
    pub patient_at: DateTime<Utc>,
    #[serde(default)]
    pub rated_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub responded_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub session_id: SessionId,
    pub simulation_index: u32,
    pub turn_index: u32,
    /// Incremented every time an updated copy of this turn is appended.
    pub revision: u32,
    pub prompt_version: String,
    pub model_id: String,
    pub task_step_current: String,
    #[serde(default)]
    pub task_step_next: Option<String>,
    pub window_used: Vec<DialogueTurn>,
    pub patient: PatientUtterance,
    #[serde(default)]
    pub rating: Option<RealismRating>,
    #[serde(default)]
    pub suggestions: Option<StrategySuggestionSet>,
    /// Model calls spent producing `suggestions` (2 when the first reply was unparseable).
    #[serde(default)]
    pub suggestion_attempts: Option<u32>,
    #[serde(default)]
    pub caregiver: Option<CaregiverAction>,
    pub timestamps: TurnTimestamps,
    #[serde(default)]
    pub failure_codes: Option<Vec<FailureMode>>,
}

pub type TurnKey = (SessionId, u32, u32);

impl TurnRecord {
    pub fn key(&self) -> TurnKey {
        (self.session_id.clone(), self.simulation_index, self.turn_index)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let ts = &self.timestamps;
        if ts.rated_at.is_some_and(|r| r < ts.patient_at) {
            return Err("rated_at precedes patient_at".into());
        }
        if let (Some(rated), Some(responded)) = (ts.rated_at, ts.responded_at) {
            if responded < rated {
                return Err("responded_at precedes rated_at".into());
            }
        }
        if self.caregiver.is_some() && self.rating.is_none() {
            return Err("caregiver reply recorded before a rating".into());
        }
        if self.caregiver.as_ref().is_some_and(|c| c.mode() == CaregiverMode::Selected) && self.suggestions.is_none() {
            return Err("selected caregiver reply without suggestions".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Sessions,
    Turns,
}

impl Stream {
    pub fn file_name(self) -> &'static str {
        match self {
            Stream::Sessions => SESSIONS_FILE,
            Stream::Turns => TURNS_FILE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("store unavailable: {0}")]
    Unavailable(String),
    #[error("corrupt record in {} at line {line}", stream.file_name())]
    CorruptRecord { stream: Stream, line: usize },
    #[error("record rejected: {0}")]
    InvalidRecord(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Unavailable(e.to_string())
    }
}

/// Everything in the store, in write order, plus any unreadable lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedLog {
    pub sessions: Vec<SessionRecord>,
    pub turns: Vec<TurnRecord>,
    pub issues: Vec<StoreError>,
}

/// Latest version of every session and turn, ordered by first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogSnapshot {
    pub sessions: Vec<SessionRecord>,
    pub turns: Vec<TurnRecord>,
}

fn latest_by_key<T: Clone, K: Eq + std::hash::Hash>(items: &[T], key: impl Fn(&T) -> K) -> Vec<T> {
    let mut slots: HashMap<K, usize> = HashMap::new();
    let mut out: Vec<T> = Vec::new();
    for item in items {
        match slots.get(&key(item)) {
            Some(&i) => out[i] = item.clone(),
            None => {
                slots.insert(key(item), out.len());
                out.push(item.clone());
            }
        }
    }
    out
}

impl LoadedLog {
    pub fn snapshot(&self) -> LogSnapshot {
        LogSnapshot {
            sessions: latest_by_key(&self.sessions, |s| s.session_id.clone()),
            turns: latest_by_key(&self.turns, TurnRecord::key),
        }
    }
}

impl LogSnapshot {
    pub fn session(&self, id: &SessionId) -> Option<&SessionRecord> {
        self.sessions.iter().find(|s| &s.session_id == id)
    }

    /// Turns of one simulation ordered by turn index.
    pub fn simulation_turns(&self, id: &SessionId, simulation_index: u32) -> Vec<&TurnRecord> {
        let mut turns: Vec<_> = self
            .turns
            .iter()
            .filter(|t| &t.session_id == id && t.simulation_index == simulation_index)
            .collect();
        turns.sort_by_key(|t| t.turn_index);
        turns
    }

    pub fn scenario_of(&self, id: &SessionId, simulation_index: u32) -> Option<&ScenarioConfig> {
        self.session(id)?.simulation(simulation_index).map(|s| &s.scenario)
    }
}

pub trait Store: Send + Sync {
    fn append_turn(&self, record: &TurnRecord) -> Result<(), StoreError>;
    fn upsert_session(&self, record: &SessionRecord) -> Result<(), StoreError>;
    fn load_all(&self) -> Result<LoadedLog, StoreError>;
}

fn encode<T: Serialize>(record: &T) -> Result<Vec<u8>, StoreError> {
    let mut line = serde_json::to_vec(record).map_err(|e| StoreError::InvalidRecord(e.to_string()))?;
    line.push(b'\n');
    Ok(line)
}

fn check_turn(record: &TurnRecord) -> Result<(), StoreError> {
    record.check_invariants().map_err(StoreError::InvalidRecord)
}

fn check_session(record: &SessionRecord) -> Result<(), StoreError> {
    let increasing = record.simulations.windows(2).all(|w| w[0].simulation_index < w[1].simulation_index);
    if increasing {
        Ok(())
    } else {
        Err(StoreError::InvalidRecord("simulation indices must be strictly increasing".into()))
    }
}

/// Decodes newline-terminated JSON lines. A final line without a newline is
/// a write still in flight and is skipped.
fn decode_lines<T: for<'de> Deserialize<'de>>(text: &str, stream: Stream, issues: &mut Vec<StoreError>) -> Vec<T> {
    let mut out = Vec::new();
    let Some(end) = text.rfind('\n') else {
        return out;
    };
    for (i, line) in text[..end].split('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) => issues.push(StoreError::CorruptRecord { stream, line: i + 1 }),
        }
    }
    out
}

fn decode_log(sessions: &str, turns: &str) -> LoadedLog {
    let mut issues = Vec::new();
    let sessions = decode_lines(sessions, Stream::Sessions, &mut issues);
    let turns = decode_lines(turns, Stream::Turns, &mut issues);
    LoadedLog { sessions, turns, issues }
}

/// File-backed default: `sessions.jsonl` and `turns.jsonl` in one directory,
/// each written by a single serialized writer.
#[derive(Debug)]
pub struct JsonlStore {
    dir: PathBuf,
    sessions: Mutex<File>,
    turns: Mutex<File>,
}

impl JsonlStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let open = |name: &str| OpenOptions::new().create(true).append(true).open(dir.join(name));
        Ok(Self { sessions: Mutex::new(open(SESSIONS_FILE)?), turns: Mutex::new(open(TURNS_FILE)?), dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append(file: &Mutex<File>, line: &[u8]) -> Result<(), StoreError> {
        let mut f = file.lock().map_err(|_| StoreError::Unavailable("writer lock poisoned".into()))?;
        f.write_all(line)?;
        f.flush()?;
        Ok(())
    }

    fn read(&self, name: &str) -> Result<String, StoreError> {
        match std::fs::read_to_string(self.dir.join(name)) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
            Err(e) => Err(e.into()),
        }
    }
}

impl Store for JsonlStore {
    fn append_turn(&self, record: &TurnRecord) -> Result<(), StoreError> {
        check_turn(record)?;
        Self::append(&self.turns, &encode(record)?)
    }

    fn upsert_session(&self, record: &SessionRecord) -> Result<(), StoreError> {
        check_session(record)?;
        Self::append(&self.sessions, &encode(record)?)
    }

    fn load_all(&self) -> Result<LoadedLog, StoreError> {
        Ok(decode_log(&self.read(SESSIONS_FILE)?, &self.read(TURNS_FILE)?))
    }
}

/// In-memory store holding the same encoded lines the file store would write.
#[derive(Debug, Default)]
pub struct MemoryStore {
    sessions: Mutex<String>,
    turns: Mutex<String>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Raw `(sessions, turns)` JSONL contents.
    pub fn contents(&self) -> (String, String) {
        (self.sessions.lock().unwrap().clone(), self.turns.lock().unwrap().clone())
    }

    fn append(buf: &Mutex<String>, line: Vec<u8>) -> Result<(), StoreError> {
        let line = String::from_utf8(line).expect("serde_json emits UTF-8");
        buf.lock().map_err(|_| StoreError::Unavailable("lock poisoned".into()))?.push_str(&line);
        Ok(())
    }
}

impl Store for MemoryStore {
    fn append_turn(&self, record: &TurnRecord) -> Result<(), StoreError> {
        check_turn(record)?;
        Self::append(&self.turns, encode(record)?)
    }

    fn upsert_session(&self, record: &SessionRecord) -> Result<(), StoreError> {
        check_session(record)?;
        Self::append(&self.sessions, encode(record)?)
    }

    fn load_all(&self) -> Result<LoadedLog, StoreError> {
        let (sessions, turns) = self.contents();
        Ok(decode_log(&sessions, &turns))
    }
}

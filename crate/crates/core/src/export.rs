//! Transcript export of one simulation as plain text or CSV.
//!
//! The background survey is never included.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::SessionId;
use crate::store::{LogSnapshot, SimulationRecord, TurnRecord};
use crate::strategy::Strategy;

pub const CSV_COLUMNS: [&str; 22] = [
    "session_id",
    "simulation_index",
    "turn_index",
    "stage",
    "care_setting",
    "setting_duration",
    "adl",
    "patient_verbal",
    "patient_cues",
    "rating_score",
    "rating_critique",
    "suggestion_recognition",
    "suggestion_negotiation",
    "suggestion_facilitation",
    "suggestion_validation",
    "caregiver_mode",
    "caregiver_strategy",
    "caregiver_edited",
    "caregiver_text",
    "patient_at",
    "rated_at",
    "responded_at",
];

pub const CUE_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Txt,
    Csv,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Result<Self, ExportError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "txt" => Ok(Self::Txt),
            "csv" => Ok(Self::Csv),
            _ => Err(ExportError::UnsupportedFormat(s.to_owned())),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Txt => "txt",
            Self::Csv => "csv",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Self::Txt => "text/plain; charset=utf-8",
            Self::Csv => "text/csv; charset=utf-8",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("no simulation {simulation_index} in session {session_id}")]
    UnknownSimulation { session_id: SessionId, simulation_index: u32 },
    #[error("unsupported export format `{0}` (expected txt or csv)")]
    UnsupportedFormat(String),
    #[error("malformed transcript CSV: {0}")]
    MalformedCsv(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptDocument {
    pub file_name: String,
    pub format: ExportFormat,
    pub body: String,
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub session_id: String,
    pub simulation_index: u32,
    pub turn_index: u32,
    pub stage: String,
    pub care_setting: String,
    pub setting_duration: String,
    pub adl: String,
    pub patient_verbal: String,
    pub patient_cues: String,
    pub rating_score: Option<u8>,
    pub rating_critique: Option<String>,
    pub suggestion_recognition: Option<String>,
    pub suggestion_negotiation: Option<String>,
    pub suggestion_facilitation: Option<String>,
    pub suggestion_validation: Option<String>,
    pub caregiver_mode: Option<String>,
    pub caregiver_strategy: Option<String>,
    pub caregiver_edited: Option<bool>,
    pub caregiver_text: Option<String>,
    pub patient_at: String,
    pub rated_at: Option<String>,
    pub responded_at: Option<String>,
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn find_simulation<'a>(
    snapshot: &'a LogSnapshot,
    session_id: &SessionId,
    simulation_index: u32,
) -> Result<(&'a SimulationRecord, Vec<&'a TurnRecord>), ExportError> {
    let sim = snapshot.session(session_id).and_then(|s| s.simulation(simulation_index)).ok_or_else(|| {
        ExportError::UnknownSimulation { session_id: session_id.clone(), simulation_index }
    })?;
    Ok((sim, snapshot.simulation_turns(session_id, simulation_index)))
}

fn row(sim: &SimulationRecord, turn: &TurnRecord) -> TranscriptRow {
    let scenario = &sim.scenario;
    let suggestion = |s: Strategy| turn.suggestions.as_ref().map(|set| set.get(s).to_owned());
    let caregiver = turn.caregiver.as_ref();
    TranscriptRow {
        session_id: turn.session_id.to_string(),
        simulation_index: turn.simulation_index,
        turn_index: turn.turn_index,
        stage: scenario.stage.as_str().to_owned(),
        care_setting: scenario.care_setting.export_token(),
        setting_duration: scenario.setting_duration.as_str().to_owned(),
        adl: scenario.adl.export_token(),
        patient_verbal: turn.patient.verbal.clone(),
        patient_cues: turn.patient.cues.join(CUE_SEPARATOR),
        rating_score: turn.rating.as_ref().map(|r| r.score),
        rating_critique: turn.rating.as_ref().and_then(|r| r.critique.clone()),
        suggestion_recognition: suggestion(Strategy::Recognition),
        suggestion_negotiation: suggestion(Strategy::Negotiation),
        suggestion_facilitation: suggestion(Strategy::Facilitation),
        suggestion_validation: suggestion(Strategy::Validation),
        caregiver_mode: caregiver.map(|c| c.mode().as_str().to_owned()),
        caregiver_strategy: caregiver.and_then(|c| c.selected_strategy()).map(|s| s.as_str().to_owned()),
        caregiver_edited: caregiver.map(|c| c.edited()),
        caregiver_text: caregiver.map(|c| c.final_text().to_owned()),
        patient_at: format_timestamp(turn.timestamps.patient_at),
        rated_at: turn.timestamps.rated_at.map(format_timestamp),
        responded_at: turn.timestamps.responded_at.map(format_timestamp),
    }
}

/// Rows for one simulation, ordered by turn index.
pub fn transcript_rows(
    snapshot: &LogSnapshot,
    session_id: &SessionId,
    simulation_index: u32,
) -> Result<Vec<TranscriptRow>, ExportError> {
    let (sim, turns) = find_simulation(snapshot, session_id, simulation_index)?;
    Ok(turns.into_iter().map(|t| row(sim, t)).collect())
}

/// Collapses line breaks so every transcript entry stays on one line.
fn one_line(text: &str) -> String {
    text.split(['\r', '\n']).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

fn render_txt(session_id: &SessionId, sim: &SimulationRecord, turns: &[&TurnRecord]) -> String {
    let scenario = &sim.scenario;
    let first = turns.first();
    let mut lines = vec![
        format!("Session: {session_id}"),
        format!("Simulation: {}", sim.simulation_index),
        format!("Stage: {}", scenario.stage.as_str()),
        format!("Care setting: {}", one_line(&scenario.care_setting.export_token())),
        format!("Setting duration: {}", scenario.setting_duration.as_str()),
        format!("ADL: {}", one_line(&scenario.adl.export_token())),
    ];
    if let Some(c) = &scenario.challenges {
        lines.push(format!("Challenges: {}", one_line(c)));
    }
    lines.push(format!("Prompt version: {}", first.map_or("n/a", |t| t.prompt_version.as_str())));
    lines.push(format!("Model: {}", first.map_or("n/a", |t| t.model_id.as_str())));
    lines.push(String::new());

    for t in turns {
        let k = t.turn_index;
        lines.push(format!("T{k} PATIENT: {}", one_line(&t.patient.raw)));
        if let Some(r) = &t.rating {
            match &r.critique {
                Some(c) => lines.push(format!("T{k} RATING: {} | {}", r.score, one_line(c))),
                None => lines.push(format!("T{k} RATING: {}", r.score)),
            }
        }
        if let Some(c) = &t.caregiver {
            lines.push(format!("T{k} CAREGIVER: {}", one_line(c.final_text())));
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn render_csv(rows: &[TranscriptRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::CRLF).from_writer(vec![]);
    w.write_record(CSV_COLUMNS).expect("writing to memory");
    for r in rows {
        w.serialize(r).expect("transcript rows serialize");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

pub fn export_transcript(
    snapshot: &LogSnapshot,
    session_id: &SessionId,
    simulation_index: u32,
    format: ExportFormat,
) -> Result<TranscriptDocument, ExportError> {
    let (sim, turns) = find_simulation(snapshot, session_id, simulation_index)?;
    let body = match format {
        ExportFormat::Txt => render_txt(session_id, sim, &turns),
        ExportFormat::Csv => render_csv(&turns.iter().map(|t| row(sim, t)).collect::<Vec<_>>()),
    };
    Ok(TranscriptDocument {
        file_name: format!("{session_id}_{simulation_index}.{}", format.extension()),
        format,
        body,
    })
}

/// Reads an exported CSV back; the header must match [`CSV_COLUMNS`] exactly.
pub fn parse_transcript_csv(text: &str) -> Result<Vec<TranscriptRow>, ExportError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| ExportError::MalformedCsv(e.to_string()))?;
    if !headers.iter().eq(CSV_COLUMNS) {
        return Err(ExportError::MalformedCsv("header does not match the transcript columns".into()));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(|e| ExportError::MalformedCsv(e.to_string()))
}

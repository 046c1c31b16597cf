//! Turn-based session state machine.
//!
//! Per-session operations are serialized on a per-session async mutex that is
//! held across model calls, so concurrent requests for one session queue in
//! arrival order while distinct sessions run in parallel. Every operation
//! computes its new state on a copy, persists it, and only then commits; a
//! failed model call or store write leaves the session unchanged.

mod types;

use std::collections::HashMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex as StdMutex};

use chrono::{DateTime, Duration as ChronoDuration, Utc};
use rand::rngs::StdRng;
use rand::SeedableRng;
use thiserror::Error;
use tokio::sync::Mutex;

use crate::analysis::FailureMode;
use crate::export::{export_transcript, ExportError, ExportFormat, TranscriptDocument};
use crate::gateway::{Gateway, GatewayError, MockSeed, RequestKind, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::prompt::{
    build_patient_prompt, build_suggestion_prompt, window_history, DialogueTurn, Speaker, DEFAULT_WINDOW,
    PROMPT_VERSION,
};
use crate::scenario::{ScenarioConfig, ScenarioErrors};
use crate::store::{
    LoadedLog, LogSnapshot, SessionRecord, SimulationRecord, Store, StoreError, TurnRecord, TurnTimestamps,
};
use crate::strategy::{parse_suggestions, StrategySuggestionSet, SuggestionParseError};
use crate::task_plan::{PlanLibrary, TaskProgress};
use crate::utterance::parse_patient_text;

pub use types::*;

pub const DEFAULT_MAX_TURNS: u32 = 10;

/// Model calls allowed per suggestion request (one retry after an unparseable reply).
pub const SUGGESTION_ATTEMPTS: u32 = 2;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: each reading is one `step` later than the previous.
#[derive(Debug)]
pub struct SteppingClock {
    start: DateTime<Utc>,
    step: ChronoDuration,
    ticks: AtomicI64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: ChronoDuration) -> Self {
        Self { start, step, ticks: AtomicI64::new(0) }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * n as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub max_turns: u32,
    pub window: usize,
    pub max_output_tokens: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { max_turns: DEFAULT_MAX_TURNS, window: DEFAULT_WINDOW, max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("a simulation is already running in this session; end or reset it first")]
    SimulationActive,
    #[error("`{operation}` is not allowed {}", phase.map_or("before a simulation starts".to_owned(), |p| format!("while the simulation is {p}")))]
    WrongPhase { operation: &'static str, phase: Option<Phase> },
    #[error("realism score {0} is outside 1-5")]
    ScoreOutOfRange(i64),
    #[error("caregiver response text is empty")]
    EmptyResponse,
    #[error("request suggestions for this turn before selecting one")]
    SuggestionsRequired,
    #[error(transparent)]
    InvalidScenario(#[from] ScenarioErrors),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model suggestions could not be parsed after {SUGGESTION_ATTEMPTS} attempts: {0}")]
    ParseRetryExhausted(SuggestionParseError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no simulation {simulation_index} in session {session_id}")]
    UnknownSimulation { session_id: SessionId, simulation_index: u32 },
    #[error("no turn {turn_index} in simulation {simulation_index} of session {session_id}")]
    UnknownTurn { session_id: SessionId, simulation_index: u32, turn_index: u32 },
    #[error("all session ids are in use")]
    IdSpaceExhausted,
    #[error("unsupported export format `{0}` (expected txt or csv)")]
    UnsupportedFormat(String),
}

impl From<ExportError> for EngineError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::UnknownSimulation { session_id, simulation_index } => {
                EngineError::UnknownSimulation { session_id, simulation_index }
            }
            ExportError::UnsupportedFormat(f) => EngineError::UnsupportedFormat(f),
            ExportError::MalformedCsv(m) => EngineError::Store(StoreError::InvalidRecord(m)),
        }
    }
}

#[derive(Debug, Clone)]
struct ActiveSimulation {
    state: SimulationState,
    /// Latest revision of the current turn's record.
    current: TurnRecord,
}

#[derive(Debug)]
struct SessionSlot {
    record: SessionRecord,
    active: Option<ActiveSimulation>,
}

impl SessionSlot {
    fn phase(&self) -> Option<Phase> {
        self.active.as_ref().map(|a| a.state.phase)
    }

    fn expect_phase(&self, operation: &'static str, want: Phase) -> Result<&ActiveSimulation, EngineError> {
        match &self.active {
            Some(a) if a.state.phase == want => Ok(a),
            _ => Err(EngineError::WrongPhase { operation, phase: self.phase() }),
        }
    }
}

/// Read-only view of a session for clients.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub created_at: DateTime<Utc>,
    pub survey_submitted: bool,
    pub simulations_started: usize,
    pub simulation: Option<SimulationState>,
    /// Suggestions already generated for the current turn.
    pub suggestions: Option<StrategySuggestionSet>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StartedSimulation {
    pub state: SimulationState,
    pub patient_turn: PatientTurn,
}

pub struct EngineBuilder {
    gateway: Gateway,
    store: Arc<dyn Store>,
    plans: PlanLibrary,
    config: EngineConfig,
    clock: Arc<dyn Clock>,
    id_seed: Option<u64>,
}

impl EngineBuilder {
    pub fn new(gateway: Gateway, store: Arc<dyn Store>) -> Self {
        Self {
            gateway,
            store,
            plans: PlanLibrary::builtin(),
            config: EngineConfig::default(),
            clock: Arc::new(SystemClock),
            id_seed: None,
        }
    }

    pub fn config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn plans(mut self, plans: PlanLibrary) -> Self {
        self.plans = plans;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Seeds session id generation; without a seed ids come from OS entropy.
    pub fn id_seed(mut self, seed: u64) -> Self {
        self.id_seed = Some(seed);
        self
    }

    /// Loads existing sessions from the store. Simulations that were running
    /// when the previous process stopped are not resumed.
    pub fn build(self) -> Result<Engine, EngineError> {
        let log = self.store.load_all()?;
        let sessions = log
            .snapshot()
            .sessions
            .into_iter()
            .map(|record| {
                let id = record.session_id.clone();
                (id, Arc::new(Mutex::new(SessionSlot { record, active: None })))
            })
            .collect();
        let rng = match self.id_seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_entropy(),
        };
        let mut config = self.config;
        config.max_turns = config.max_turns.max(1);
        config.window = config.window.max(1);
        Ok(Engine {
            gateway: self.gateway,
            store: self.store,
            plans: self.plans,
            config,
            clock: self.clock,
            rng: StdMutex::new(rng),
            sessions: StdMutex::new(sessions),
            load_issues: log.issues,
        })
    }
}

pub struct Engine {
    gateway: Gateway,
    store: Arc<dyn Store>,
    plans: PlanLibrary,
    config: EngineConfig,
    clock: Arc<dyn Clock>,
    rng: StdMutex<StdRng>,
    sessions: StdMutex<HashMap<SessionId, Arc<Mutex<SessionSlot>>>>,
    load_issues: Vec<StoreError>,
}

impl Engine {
    pub fn builder(gateway: Gateway, store: Arc<dyn Store>) -> EngineBuilder {
        EngineBuilder::new(gateway, store)
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    /// Unreadable store lines found at startup.
    pub fn load_issues(&self) -> &[StoreError] {
        &self.load_issues
    }

    fn slot(&self, id: &SessionId) -> Result<Arc<Mutex<SessionSlot>>, EngineError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))
    }

    pub async fn create_session(&self) -> Result<SessionId, EngineError> {
        let created_at = self.clock.now();
        let mut sessions = self.sessions.lock().expect("session map lock");
        if sessions.len() >= SessionId::SPACE as usize {
            return Err(EngineError::IdSpaceExhausted);
        }
        let id = {
            let mut rng = self.rng.lock().expect("rng lock");
            loop {
                let id = SessionId::random(&mut *rng);
                if !sessions.contains_key(&id) {
                    break id;
                }
            }
        };
        let record = SessionRecord { session_id: id.clone(), created_at, survey: None, simulations: vec![] };
        self.store.upsert_session(&record)?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(SessionSlot { record, active: None })));
        Ok(id)
    }

    /// Replaces any earlier survey. Only accepted before the first simulation.
    pub async fn submit_survey(&self, id: &SessionId, survey: BackgroundSurvey) -> Result<(), EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        if !slot.record.simulations.is_empty() {
            return Err(EngineError::WrongPhase { operation: "submit_survey", phase: slot.phase() });
        }
        let mut record = slot.record.clone();
        record.survey = Some(survey);
        self.store.upsert_session(&record)?;
        slot.record = record;
        Ok(())
    }

    fn patient_request(
        &self,
        scenario: &ScenarioConfig,
        progress: &TaskProgress,
        history: &[DialogueTurn],
        turn_index: u32,
    ) -> Result<crate::gateway::ChatRequest, EngineError> {
        let bundle = build_patient_prompt(scenario, progress, history, self.config.window)?;
        let mut req = self.gateway.request(
            bundle,
            RequestKind::PatientTurn,
            Some(MockSeed { scenario: scenario.clone(), turn_index }),
        );
        req.max_output_tokens = self.config.max_output_tokens;
        Ok(req)
    }

    /// Generates patient turn `turn_index` from `history` and returns it with
    /// its first record revision.
    async fn generate_patient_turn(
        &self,
        session: &SessionId,
        simulation_index: u32,
        scenario: &ScenarioConfig,
        progress: &TaskProgress,
        history: &[DialogueTurn],
        turn_index: u32,
    ) -> Result<(PatientTurn, TurnRecord), EngineError> {
        let req = self.patient_request(scenario, progress, history, turn_index)?;
        let resp = self.gateway.complete(&req).await?;
        let generated_at = self.clock.now();
        let utterance = parse_patient_text(&resp.text);
        let ctx = progress.context();
        let record = TurnRecord {
            session_id: session.clone(),
            simulation_index,
            turn_index,
            revision: 0,
            prompt_version: PROMPT_VERSION.to_owned(),
            model_id: req.model_id.clone(),
            task_step_current: ctx.current_step,
            task_step_next: ctx.next_step,
            window_used: window_history(history, self.config.window).to_vec(),
            patient: utterance.clone(),
            rating: None,
            suggestions: None,
            suggestion_attempts: None,
            caregiver: None,
            timestamps: TurnTimestamps { patient_at: generated_at, rated_at: None, responded_at: None },
            failure_codes: None,
        };
        Ok((PatientTurn { turn_index, utterance, generated_at }, record))
    }

    pub async fn start_simulation(
        &self,
        id: &SessionId,
        scenario: ScenarioConfig,
    ) -> Result<StartedSimulation, EngineError> {
        scenario.validate()?;
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        if matches!(slot.phase(), Some(p) if p != Phase::Ended) {
            return Err(EngineError::SimulationActive);
        }
        let simulation_index = slot.record.simulations.last().map_or(1, |s| s.simulation_index + 1);
        let progress = TaskProgress::start(self.plans.plan_for(&scenario.adl));

        let (patient_turn, turn) =
            self.generate_patient_turn(id, simulation_index, &scenario, &progress, &[], 1).await?;

        let mut record = slot.record.clone();
        record.simulations.push(SimulationRecord {
            simulation_index,
            scenario: scenario.clone(),
            max_turns: self.config.max_turns,
            started_at: patient_turn.generated_at,
            ended_at: None,
            end_reason: None,
        });
        self.store.upsert_session(&record)?;
        self.store.append_turn(&turn)?;

        let state = SimulationState {
            session: id.clone(),
            simulation_index,
            scenario,
            progress,
            history: vec![DialogueTurn { speaker: Speaker::Patient, text: patient_turn.utterance.raw.clone(), turn_index: 1 }],
            phase: Phase::AwaitingRating,
            turn_index: 1,
            max_turns: self.config.max_turns,
        };
        slot.record = record;
        slot.active = Some(ActiveSimulation { state: state.clone(), current: turn });
        Ok(StartedSimulation { state, patient_turn })
    }

    pub async fn submit_rating(&self, id: &SessionId, score: i64, critique: Option<&str>) -> Result<(), EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        let active = slot.expect_phase("submit_rating", Phase::AwaitingRating)?;
        let rating = RealismRating::new(score, critique).ok_or(EngineError::ScoreOutOfRange(score))?;

        let mut turn = active.current.clone();
        turn.revision += 1;
        turn.rating = Some(rating);
        turn.timestamps.rated_at = Some(self.clock.now());
        self.store.append_turn(&turn)?;

        let active = slot.active.as_mut().expect("checked above");
        active.current = turn;
        active.state.phase = Phase::AwaitingCaregiver;
        Ok(())
    }

    /// Four options for the current turn, generated once and then returned
    /// unchanged for the rest of the turn.
    pub async fn get_suggestions(&self, id: &SessionId) -> Result<StrategySuggestionSet, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        let active = slot.expect_phase("get_suggestions", Phase::AwaitingCaregiver)?;
        if let Some(set) = &active.current.suggestions {
            return Ok(set.clone());
        }

        let state = &active.state;
        let bundle = build_suggestion_prompt(
            &state.scenario,
            &state.progress,
            &state.history,
            self.config.window,
            &active.current.patient,
        )?;
        let mut req = self.gateway.request(
            bundle,
            RequestKind::Suggestions,
            Some(MockSeed { scenario: state.scenario.clone(), turn_index: state.turn_index }),
        );
        req.max_output_tokens = self.config.max_output_tokens;

        let mut attempts = 0;
        let set = loop {
            attempts += 1;
            let resp = self.gateway.complete(&req).await?;
            match parse_suggestions(&resp.text) {
                Ok(set) => break set,
                Err(e) if attempts >= SUGGESTION_ATTEMPTS => return Err(EngineError::ParseRetryExhausted(e)),
                Err(e) => tracing::warn!(error = %e, "unparseable suggestions, retrying"),
            }
        };

        let mut turn = active.current.clone();
        turn.revision += 1;
        turn.suggestions = Some(set.clone());
        turn.suggestion_attempts = Some(attempts);
        self.store.append_turn(&turn)?;
        slot.active.as_mut().expect("checked above").current = turn;
        Ok(set)
    }

    /// Records the caregiver reply, advances the task plan by one step and
    /// either generates the next patient turn or ends at the turn limit.
    pub async fn submit_caregiver(&self, id: &SessionId, input: CaregiverInput) -> Result<CaregiverOutcome, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        let active = slot.expect_phase("submit_caregiver", Phase::AwaitingCaregiver)?;
        let text = input.text().trim();
        if text.is_empty() {
            return Err(EngineError::EmptyResponse);
        }
        let action = match &input {
            CaregiverInput::FreeText { .. } => CaregiverAction::free_text(text),
            CaregiverInput::Selected { strategy, .. } => {
                let set = active.current.suggestions.as_ref().ok_or(EngineError::SuggestionsRequired)?;
                CaregiverAction::selected(*strategy, set.get(*strategy), text)
            }
        };

        let mut state = active.state.clone();
        state.history.push(DialogueTurn { speaker: Speaker::Caregiver, text: text.to_owned(), turn_index: state.turn_index });
        state.progress = state.progress.advance();

        let mut answered = active.current.clone();
        answered.revision += 1;
        answered.caregiver = Some(action);
        answered.timestamps.responded_at = Some(self.clock.now());

        if state.turn_index >= state.max_turns {
            let mut record = slot.record.clone();
            let ended_at = answered.timestamps.responded_at.expect("set above");
            close_simulation(&mut record, state.simulation_index, ended_at, EndReason::MaxTurns);
            self.store.append_turn(&answered)?;
            self.store.upsert_session(&record)?;
            state.phase = Phase::Ended;
            slot.record = record;
            slot.active = Some(ActiveSimulation { state, current: answered });
            return Ok(CaregiverOutcome::Ended { reason: EndReason::MaxTurns });
        }

        let next_index = state.turn_index + 1;
        let (patient_turn, next) = self
            .generate_patient_turn(id, state.simulation_index, &state.scenario, &state.progress, &state.history, next_index)
            .await?;
        self.store.append_turn(&answered)?;
        self.store.append_turn(&next)?;

        state.history.push(DialogueTurn {
            speaker: Speaker::Patient,
            text: patient_turn.utterance.raw.clone(),
            turn_index: next_index,
        });
        state.turn_index = next_index;
        state.phase = Phase::AwaitingRating;
        slot.active = Some(ActiveSimulation { state, current: next });
        Ok(CaregiverOutcome::NextTurn { patient_turn })
    }

    async fn close(&self, id: &SessionId, reason: EndReason) -> Result<(), EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        let Some(active) = slot.active.as_ref().filter(|a| a.state.phase != Phase::Ended) else {
            return Ok(());
        };
        let mut record = slot.record.clone();
        close_simulation(&mut record, active.state.simulation_index, self.clock.now(), reason);
        self.store.upsert_session(&record)?;
        slot.record = record;
        slot.active.as_mut().expect("checked above").state.phase = Phase::Ended;
        Ok(())
    }

    /// Ends the running simulation. A no-op when nothing is running.
    pub async fn end_simulation(&self, id: &SessionId) -> Result<(), EngineError> {
        self.close(id, EndReason::UserEnded).await
    }

    /// Ends the running simulation so a new one can start. A no-op when
    /// nothing is running.
    pub async fn reset_simulation(&self, id: &SessionId) -> Result<(), EngineError> {
        self.close(id, EndReason::Reset).await
    }

    pub async fn session_view(&self, id: &SessionId) -> Result<SessionView, EngineError> {
        let slot = self.slot(id)?;
        let slot = slot.lock().await;
        Ok(SessionView {
            session_id: slot.record.session_id.clone(),
            created_at: slot.record.created_at,
            survey_submitted: slot.record.survey.is_some(),
            simulations_started: slot.record.simulations.len(),
            simulation: slot.active.as_ref().map(|a| a.state.clone()),
            suggestions: slot.active.as_ref().and_then(|a| a.current.suggestions.clone()),
        })
    }

    pub async fn simulation_state(&self, id: &SessionId) -> Result<Option<SimulationState>, EngineError> {
        Ok(self.session_view(id).await?.simulation)
    }

    pub async fn session_record(&self, id: &SessionId) -> Result<SessionRecord, EngineError> {
        let slot = self.slot(id)?;
        let record = slot.lock().await.record.clone();
        Ok(record)
    }

    /// Replaces the failure codes on one turn by appending a new revision.
    /// An empty list clears them.
    pub async fn annotate(
        &self,
        id: &SessionId,
        simulation_index: u32,
        turn_index: u32,
        codes: &[FailureMode],
    ) -> Result<TurnRecord, EngineError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().await;
        let is_current = slot.active.as_ref().is_some_and(|a| {
            a.current.simulation_index == simulation_index && a.current.turn_index == turn_index
        });
        let mut turn = if is_current {
            slot.active.as_ref().expect("checked above").current.clone()
        } else {
            if slot.record.simulation(simulation_index).is_none() {
                return Err(EngineError::UnknownSimulation { session_id: id.clone(), simulation_index });
            }
            self.store
                .load_all()?
                .snapshot()
                .simulation_turns(id, simulation_index)
                .into_iter()
                .find(|t| t.turn_index == turn_index)
                .cloned()
                .ok_or_else(|| EngineError::UnknownTurn { session_id: id.clone(), simulation_index, turn_index })?
        };
        let mut codes = codes.to_vec();
        codes.sort();
        codes.dedup();
        turn.revision += 1;
        turn.failure_codes = (!codes.is_empty()).then_some(codes);
        self.store.append_turn(&turn)?;
        if is_current {
            slot.active.as_mut().expect("checked above").current = turn.clone();
        }
        Ok(turn)
    }

    pub fn load_log(&self) -> Result<LoadedLog, EngineError> {
        Ok(self.store.load_all()?)
    }

    pub fn snapshot(&self) -> Result<LogSnapshot, EngineError> {
        Ok(self.load_log()?.snapshot())
    }

    pub async fn export(
        &self,
        id: &SessionId,
        simulation_index: u32,
        format: ExportFormat,
    ) -> Result<TranscriptDocument, EngineError> {
        self.slot(id)?;
        Ok(export_transcript(&self.snapshot()?, id, simulation_index, format)?)
    }
}

fn close_simulation(record: &mut SessionRecord, simulation_index: u32, at: DateTime<Utc>, reason: EndReason) {
    if let Some(sim) = record.simulations.iter_mut().find(|s| s.simulation_index == simulation_index) {
        if sim.end_reason.is_none() {
            sim.ended_at = Some(at);
            sim.end_reason = Some(reason);
        }
    }
}

//! Randomized operation sequences against the session engine with a
//! reference model of the expected outcome of every call.

use std::sync::Arc;

use adlsim_core::gateway::MockBackend;
use adlsim_core::prompt::Speaker;
use adlsim_core::scenario::{AdlKind, DementiaStage};
use adlsim_core::session::{
    BackgroundSurvey, CaregiverInput, CaregiverOutcome, EngineError, Phase, SessionId, SimulationState,
};
use adlsim_core::store::{MemoryStore, Store, TurnRecord};
use adlsim_core::strategy::Strategy;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{engine_with, scenario};

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Survey,
    Start { stage: usize, adl: usize },
    Rate { score: i64 },
    Suggest,
    Free { empty: bool },
    Select { strategy: usize, edit: bool },
    End,
    Reset,
}

/// Uniform-ish mix of every operation; `focused` sequences mostly move the
/// conversation forward so they regularly reach the turn cap.
pub fn random_ops(rng: &mut StdRng, len: usize, focused: bool) -> Vec<Op> {
    let mut ops = Vec::with_capacity(len + 1);
    if focused {
        ops.push(Op::Start { stage: rng.gen_range(0..3), adl: rng.gen_range(0..AdlKind::ALL.len()) });
    }
    while ops.len() < len {
        let roll = rng.gen_range(0..100);
        let op = if focused {
            match roll {
                0..=34 => Op::Rate { score: rng.gen_range(1..=5) },
                35..=49 => Op::Suggest,
                50..=74 => Op::Free { empty: false },
                75..=94 => Op::Select { strategy: rng.gen_range(0..4), edit: rng.gen_bool(0.5) },
                95..=96 => Op::Rate { score: rng.gen_range(-1..=7) },
                97 => Op::Start { stage: rng.gen_range(0..3), adl: rng.gen_range(0..AdlKind::ALL.len()) },
                98 => Op::End,
                _ => Op::Reset,
            }
        } else {
            match roll {
                0..=3 => Op::Survey,
                4..=15 => Op::Start { stage: rng.gen_range(0..3), adl: rng.gen_range(0..AdlKind::ALL.len()) },
                16..=40 => Op::Rate { score: rng.gen_range(-1..=7) },
                41..=52 => Op::Suggest,
                53..=75 => Op::Free { empty: rng.gen_bool(0.1) },
                76..=91 => Op::Select { strategy: rng.gen_range(0..4), edit: rng.gen_bool(0.5) },
                92..=96 => Op::End,
                _ => Op::Reset,
            }
        };
        ops.push(op);
    }
    ops
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Expect {
    Ok,
    SimulationActive,
    WrongPhase,
    ScoreOutOfRange,
    EmptyResponse,
    SuggestionsRequired,
}

fn classify(r: &Result<(), EngineError>) -> Result<Expect, String> {
    match r {
        Ok(()) => Ok(Expect::Ok),
        Err(EngineError::SimulationActive) => Ok(Expect::SimulationActive),
        Err(EngineError::WrongPhase { .. }) => Ok(Expect::WrongPhase),
        Err(EngineError::ScoreOutOfRange(_)) => Ok(Expect::ScoreOutOfRange),
        Err(EngineError::EmptyResponse) => Ok(Expect::EmptyResponse),
        Err(EngineError::SuggestionsRequired) => Ok(Expect::SuggestionsRequired),
        Err(e) => Err(format!("unexpected engine error: {e}")),
    }
}

/// What the engine must do for `op` given the model state.
struct Model {
    phase: Option<Phase>,
    turn_index: u32,
    suggested: bool,
    started_any: bool,
}

impl Model {
    fn expect(&self, op: &Op, max_turns: u32) -> (Expect, Option<Phase>) {
        use Expect::*;
        let awaiting_caregiver = self.phase == Some(Phase::AwaitingCaregiver);
        let after_reply = if self.turn_index >= max_turns { Phase::Ended } else { Phase::AwaitingRating };
        match op {
            Op::Survey if self.started_any => (WrongPhase, self.phase),
            Op::Survey => (Ok, self.phase),
            Op::Start { .. } => match self.phase {
                None | Some(Phase::Ended) => (Ok, Some(Phase::AwaitingRating)),
                _ => (SimulationActive, self.phase),
            },
            Op::Rate { score } => match self.phase {
                Some(Phase::AwaitingRating) if (1..=5).contains(score) => (Ok, Some(Phase::AwaitingCaregiver)),
                Some(Phase::AwaitingRating) => (ScoreOutOfRange, self.phase),
                _ => (WrongPhase, self.phase),
            },
            Op::Suggest if awaiting_caregiver => (Ok, self.phase),
            Op::Free { empty: true } if awaiting_caregiver => (EmptyResponse, self.phase),
            Op::Free { .. } if awaiting_caregiver => (Ok, Some(after_reply)),
            Op::Select { .. } if awaiting_caregiver && !self.suggested => (SuggestionsRequired, self.phase),
            Op::Select { .. } if awaiting_caregiver => (Ok, Some(after_reply)),
            Op::Suggest | Op::Free { .. } | Op::Select { .. } => (WrongPhase, self.phase),
            Op::End | Op::Reset => (Ok, self.phase.map(|_| Phase::Ended)),
        }
    }
}

fn legal_transition(from: Option<Phase>, to: Option<Phase>) -> bool {
    use Phase::*;
    from == to
        || matches!(
            (from, to),
            (None | Some(Ended), Some(AwaitingRating))
                | (Some(Configured), Some(AwaitingRating))
                | (Some(AwaitingRating), Some(AwaitingCaregiver))
                | (Some(AwaitingCaregiver), Some(AwaitingRating))
                | (Some(_), Some(Ended))
        )
}

fn check_state(state: &SimulationState) -> Result<(), String> {
    for (i, turn) in state.history.iter().enumerate() {
        let want = if i % 2 == 0 { Speaker::Patient } else { Speaker::Caregiver };
        if turn.speaker != want {
            return Err(format!("history position {i} is {:?}", turn.speaker));
        }
    }
    let patients = state.history.iter().filter(|t| t.speaker == Speaker::Patient).count() as u32;
    if patients != state.turn_index {
        return Err(format!("{patients} patient turns but turn_index {}", state.turn_index));
    }
    if state.turn_index > state.max_turns {
        return Err(format!("turn_index {} exceeds max {}", state.turn_index, state.max_turns));
    }
    let caregivers = state.history.len() as u32 - patients;
    let expected_caregivers = match state.phase {
        Phase::AwaitingRating | Phase::AwaitingCaregiver => patients - 1,
        _ => caregivers,
    };
    if caregivers != expected_caregivers {
        return Err(format!("{caregivers} caregiver turns in phase {}", state.phase));
    }
    Ok(())
}

type Revisions = std::collections::HashMap<(SessionId, u32, u32), u32>;

/// Checks the turn lines appended since the previous step.
fn check_new_turns(appended: &str, id: &SessionId, revisions: &mut Revisions) -> Result<(), String> {
    for line in appended.lines() {
        let t: TurnRecord = serde_json::from_str(line).map_err(|e| format!("undecodable turn line: {e}"))?;
        t.check_invariants().map_err(|e| format!("turn {}: {e}", t.turn_index))?;
        if &t.session_id != id {
            return Err("turn for a foreign session".into());
        }
        if let Some(prev) = revisions.insert(t.key(), t.revision) {
            if t.revision <= prev {
                return Err(format!("revision {} after {prev} for turn {}", t.revision, t.turn_index));
            }
        }
    }
    Ok(())
}

/// Runs `ops` on a fresh engine and returns the raw store contents.
pub async fn run_sequence(ops: &[Op], max_turns: u32, id_seed: u64) -> Result<(String, String), String> {
    let store = Arc::new(MemoryStore::new());
    let engine = engine_with(Arc::new(MockBackend), store.clone(), max_turns, id_seed);
    let id = engine.create_session().await.map_err(|e| e.to_string())?;
    let mut model = Model { phase: None, turn_index: 0, suggested: false, started_any: false };
    let mut before = store.contents();
    let mut revisions = Revisions::new();

    for (step, op) in ops.iter().enumerate() {
        let (want, want_phase) = model.expect(op, max_turns);
        let mut reply_ended = None;
        let result: Result<(), EngineError> = match op {
            Op::Survey => engine.submit_survey(&id, BackgroundSurvey::default()).await,
            Op::Start { stage, adl } => engine
                .start_simulation(&id, scenario(DementiaStage::ALL[*stage], AdlKind::ALL[*adl]))
                .await
                .map(|_| ()),
            Op::Rate { score } => engine.submit_rating(&id, *score, Some("fine")).await,
            Op::Suggest => engine.get_suggestions(&id).await.map(|_| ()),
            Op::Free { empty } => {
                let text = if *empty { "  ".to_owned() } else { format!("Let's keep going, step {step}.") };
                engine.submit_caregiver(&id, CaregiverInput::FreeText { text }).await.map(|o| {
                    reply_ended = Some(matches!(o, CaregiverOutcome::Ended { .. }));
                })
            }
            Op::Select { strategy, edit } => {
                let strategy = Strategy::ALL[*strategy];
                let view = engine.session_view(&id).await.map_err(|e| e.to_string())?;
                let original = view.suggestions.as_ref().map(|s| s.get(strategy).to_owned()).unwrap_or_else(|| "x".into());
                let text = if *edit { format!("{original} Take your time.") } else { original };
                engine.submit_caregiver(&id, CaregiverInput::Selected { strategy, text }).await.map(|o| {
                    reply_ended = Some(matches!(o, CaregiverOutcome::Ended { .. }));
                })
            }
            Op::End => engine.end_simulation(&id).await,
            Op::Reset => engine.reset_simulation(&id).await,
        };
        let got = classify(&result)?;
        if got != want {
            return Err(format!("step {step} {op:?}: expected {want:?}, got {got:?} ({result:?})"));
        }

        let state = engine.simulation_state(&id).await.map_err(|e| e.to_string())?;
        let phase = state.as_ref().map(|s| s.phase);
        if phase != want_phase {
            return Err(format!("step {step} {op:?}: phase {phase:?}, expected {want_phase:?}"));
        }
        if !legal_transition(model.phase, phase) {
            return Err(format!("step {step} {op:?}: illegal transition {:?} -> {phase:?}", model.phase));
        }
        if let Some(s) = &state {
            check_state(s).map_err(|e| format!("step {step} {op:?}: {e}"))?;
        }
        if let Some(ended) = reply_ended {
            if ended != (phase == Some(Phase::Ended)) {
                return Err(format!("step {step}: outcome disagrees with phase"));
            }
        }

        let after = store.contents();
        if !after.0.starts_with(&before.0) || !after.1.starts_with(&before.1) {
            return Err(format!("step {step} {op:?}: store was rewritten"));
        }
        if got != Expect::Ok && after != before {
            return Err(format!("step {step} {op:?}: rejected operation wrote to the store"));
        }
        check_new_turns(&after.1[before.1.len()..], &id, &mut revisions)
            .map_err(|e| format!("step {step} {op:?}: {e}"))?;
        before = after;

        if got == Expect::Ok {
            match op {
                Op::Start { .. } => {
                    model.started_any = true;
                    model.turn_index = 1;
                    model.suggested = false;
                }
                Op::Suggest => model.suggested = true,
                Op::Free { .. } | Op::Select { .. } if phase == Some(Phase::AwaitingRating) => {
                    model.turn_index += 1;
                    model.suggested = false;
                }
                _ => {}
            }
        }
        model.phase = phase;
    }

    // edited flags on selected replies reflect whether the text changed
    let log = store.load_all().map_err(|e| e.to_string())?;
    if !log.issues.is_empty() {
        return Err(format!("store issues: {:?}", log.issues));
    }
    let snap = log.snapshot();
    for t in &snap.turns {
        if let Some(c) = &t.caregiver {
            if let Some(orig) = c.original_option() {
                if c.edited() != (orig != c.final_text()) {
                    return Err("edited flag disagrees with texts".into());
                }
            }
        }
    }
    Ok(store.contents())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SeedReport {
    pub ops: usize,
    /// Whether some simulation reached the turn cap.
    pub hit_cap: bool,
}

/// One seeded sequence, run twice; the second run must reproduce the log byte for byte.
pub async fn run_seed(seed: u64, max_turns: u32) -> Result<SeedReport, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let focused = rng.gen_bool(0.5);
    let len = rng.gen_range(1..=120);
    let ops = random_ops(&mut rng, len, focused);
    let first = run_sequence(&ops, max_turns, seed).await?;
    let second = run_sequence(&ops, max_turns, seed).await?;
    if first != second {
        return Err(format!("seed {seed}: replay produced a different log"));
    }
    let hit_cap = first.0.contains("\"end_reason\":\"max_turns\"");
    Ok(SeedReport { ops: ops.len(), hit_cap })
}

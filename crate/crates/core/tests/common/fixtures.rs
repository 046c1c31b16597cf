//! Synthetic logs with known aggregate statistics.

use adlsim_core::analysis::FailureMode;
use adlsim_core::prompt::PROMPT_VERSION;
use adlsim_core::scenario::*;
use adlsim_core::session::{CaregiverAction, EndReason, RealismRating, SessionId};
use adlsim_core::store::{SessionRecord, SimulationRecord, Store, StoreError, TurnRecord, TurnTimestamps};
use adlsim_core::strategy::{Strategy, StrategySuggestionSet};
use adlsim_core::utterance::parse_patient_text;
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone, Default)]
pub struct FixtureLog {
    pub sessions: Vec<SessionRecord>,
    pub turns: Vec<TurnRecord>,
}

impl FixtureLog {
    pub fn write_to(&self, store: &dyn Store) -> Result<(), StoreError> {
        for s in &self.sessions {
            store.upsert_session(s)?;
        }
        for t in &self.turns {
            store.append_turn(t)?;
        }
        Ok(())
    }

    /// Adds one single-simulation session with one turn per rating.
    pub fn add_simulation(&mut self, scenario: ScenarioConfig, ratings: &[u8]) -> SessionId {
        let n = self.sessions.len() as u32 + 1;
        let id = SessionId::from_number(n);
        let start = t0() + Duration::hours(i64::from(n));
        self.sessions.push(SessionRecord {
            session_id: id.clone(),
            created_at: start,
            survey: None,
            simulations: vec![SimulationRecord {
                simulation_index: 1,
                scenario,
                max_turns: 10,
                started_at: start,
                ended_at: Some(start + Duration::minutes(30)),
                end_reason: Some(if ratings.len() == 10 { EndReason::MaxTurns } else { EndReason::UserEnded }),
            }],
        });
        for (i, score) in ratings.iter().enumerate() {
            let at = start + Duration::minutes(i as i64 * 2);
            self.turns.push(TurnRecord {
                session_id: id.clone(),
                simulation_index: 1,
                turn_index: i as u32 + 1,
                revision: 2,
                prompt_version: PROMPT_VERSION.into(),
                model_id: "gpt-5-mini".into(),
                task_step_current: "step".into(),
                task_step_next: None,
                window_used: vec![],
                patient: parse_patient_text("Hm? (looks up)"),
                rating: Some(RealismRating { score: *score, critique: None }),
                suggestions: None,
                suggestion_attempts: None,
                caregiver: Some(CaregiverAction::free_text("Let's go on.")),
                timestamps: TurnTimestamps {
                    patient_at: at,
                    rated_at: Some(at + Duration::seconds(20)),
                    responded_at: Some(at + Duration::seconds(60)),
                },
                failure_codes: None,
            });
        }
        id
    }
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 6, 2, 9, 0, 0).unwrap()
}

pub fn known(stage: DementiaStage, adl: AdlKind) -> ScenarioConfig {
    ScenarioConfig {
        stage,
        care_setting: CareSetting::known(CareSettingKind::OwnHome),
        setting_duration: SettingDuration::OverOneYear,
        adl: Adl::known(adl),
        challenges: None,
    }
}

/// Expected cell: ADL, stage, mean, occurrences.
pub type Cell = (AdlKind, DementiaStage, f64, usize);

/// The sampled ADL x stage cells with their published means and counts.
/// Every simulation in a two-occurrence cell has the same mean, so turn-
/// and session-weighted means agree.
pub fn realism_cells() -> (FixtureLog, Vec<Cell>) {
    use AdlKind::*;
    use DementiaStage::*;
    let sims: &[(AdlKind, DementiaStage, &[u8])] = &[
        (TakingMedicines, Early, &[4, 4, 5, 4, 4]),
        (TakingMedicines, Early, &[4, 5, 4, 4, 4]),
        (TakingMedicines, Middle, &[4, 4, 4, 3, 4]),
        (TakingMedicines, Middle, &[3, 4, 4, 4, 4]),
        (TakingMedicines, Late, &[4, 3, 4, 4, 3, 4, 3, 4]),
        (BrushingTeeth, Early, &[4, 4, 4]),
        (BrushingTeeth, Middle, &[4, 4, 4, 4, 4, 4, 4, 3]),
        (BrushingTeeth, Middle, &[4, 3, 4, 4, 4, 4, 4, 4]),
        (EatingMeals, Middle, &[3, 3, 3, 4, 3, 4, 3]),
        (EatingMeals, Late, &[3, 3, 4]),
        (EatingMeals, Late, &[4, 3, 3]),
        (GettingOutOfBed, Late, &[4, 4, 4, 4]),
        (Toileting, Middle, &[4, 4, 3, 4, 4]),
        (WalkingExercise, Early, &[3, 3, 3]),
    ];
    let mut log = FixtureLog::default();
    for (adl, stage, ratings) in sims {
        log.add_simulation(known(*stage, *adl), ratings);
    }
    let expected = vec![
        (TakingMedicines, Early, 4.2, 2),
        (TakingMedicines, Middle, 3.80, 2),
        (TakingMedicines, Late, 3.62, 1),
        (BrushingTeeth, Early, 4.00, 1),
        (BrushingTeeth, Middle, 3.87, 2),
        (EatingMeals, Middle, 3.29, 1),
        (EatingMeals, Late, 3.33, 2),
        (GettingOutOfBed, Late, 4.00, 1),
        (Toileting, Middle, 3.80, 1),
        (WalkingExercise, Early, 3.00, 1),
    ];
    (log, expected)
}

pub const STUDY_SESSION_LENGTHS: [usize; 18] = [2, 3, 4, 4, 5, 5, 6, 6, 6, 6, 7, 7, 7, 8, 8, 8, 10, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    Free,
    Edited(Strategy),
    Unedited(Strategy),
}

fn suggestion_set() -> StrategySuggestionSet {
    StrategySuggestionSet::new(
        Strategy::ALL.iter().map(|s| (*s, format!("Option for {}.", s.as_str()))).collect(),
    )
    .unwrap()
}

/// 18 sessions totalling 112 caregiver turns: 61 custom (40 free text and 21
/// edited selections), 19 recognition, 16 facilitation, 10 negotiation and
/// 6 validation, shuffled across turns.
pub fn study_log() -> FixtureLog {
    let mut replies = Vec::new();
    replies.extend(std::iter::repeat_n(Reply::Free, 40));
    replies.extend(Strategy::ALL.iter().cycle().take(21).map(|s| Reply::Edited(*s)));
    for (s, n) in [
        (Strategy::Recognition, 19),
        (Strategy::Facilitation, 16),
        (Strategy::Negotiation, 10),
        (Strategy::Validation, 6),
    ] {
        replies.extend(std::iter::repeat_n(Reply::Unedited(s), n));
    }
    let mut rng = StdRng::seed_from_u64(2025);
    replies.shuffle(&mut rng);
    assert_eq!(replies.len(), STUDY_SESSION_LENGTHS.iter().sum::<usize>());

    let mut log = FixtureLog::default();
    let mut next = replies.into_iter();
    let adls = [AdlKind::TakingMedicines, AdlKind::BrushingTeeth, AdlKind::EatingMeals];
    for (i, len) in STUDY_SESSION_LENGTHS.iter().enumerate() {
        let ratings: Vec<u8> = (0..*len).map(|_| rng.gen_range(2..=5)).collect();
        let stage = DementiaStage::ALL[i % 3];
        let first = log.turns.len();
        log.add_simulation(known(stage, adls[i % adls.len()]), &ratings);
        for turn in &mut log.turns[first..] {
            let reply = next.next().expect("one reply per turn");
            turn.caregiver = Some(match reply {
                Reply::Free => CaregiverAction::free_text("Let's go on."),
                Reply::Edited(s) => {
                    turn.suggestions = Some(suggestion_set());
                    CaregiverAction::selected(s, format!("Option for {}.", s.as_str()), "My own words.")
                }
                Reply::Unedited(s) => {
                    turn.suggestions = Some(suggestion_set());
                    CaregiverAction::selected(s, format!("Option for {}.", s.as_str()), format!("Option for {}.", s.as_str()))
                }
            });
        }
    }
    log
}

/// 20 annotated turns coded so that task grounding covers 9, stage mismatch,
/// overcompliance and language 5 each, care setting and prompting 4 each.
pub fn failure_mode_log() -> FixtureLog {
    use FailureMode::*;
    let coded: Vec<(u8, Vec<FailureMode>)> = [
        (4, 2, vec![CareSettingMismatch, TaskGroundingError]),
        (4, 3, vec![TaskGroundingError, StageMismatch]),
        (1, 4, vec![TaskGroundingError, NeedsMorePrompting]),
        (1, 3, vec![StageMismatch]),
        (1, 3, vec![Overcompliance]),
        (3, 3, vec![Overcompliance, LanguageUnnaturalness]),
        (1, 2, vec![Overcompliance]),
        (2, 3, vec![LanguageUnnaturalness]),
        (2, 4, vec![NeedsMorePrompting]),
        (1, 3, vec![NeedsMorePrompting]),
    ]
    .into_iter()
    .flat_map(|(n, score, codes)| std::iter::repeat_n((score, codes), n))
    .collect();
    assert_eq!(coded.len(), 20);

    let mut log = FixtureLog::default();
    for chunk in coded.chunks(5) {
        let ratings: Vec<u8> = chunk.iter().map(|(s, _)| *s).chain([4, 5]).collect();
        let first = log.turns.len();
        log.add_simulation(known(DementiaStage::Middle, AdlKind::TakingMedicines), &ratings);
        for (turn, (_, codes)) in log.turns[first..].iter_mut().zip(chunk) {
            turn.failure_codes = Some(codes.clone());
        }
    }
    log
}

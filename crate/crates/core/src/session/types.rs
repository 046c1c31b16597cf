use std::fmt;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::prompt::DialogueTurn;
use crate::scenario::ScenarioConfig;
use crate::strategy::Strategy;
use crate::task_plan::TaskProgress;
use crate::utterance::PatientUtterance;

/// Pseudonymous session identifier of the form `Guest_NNNNN`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SessionId(String);

impl SessionId {
    pub const PREFIX: &'static str = "Guest_";
    /// Number of distinct ids.
    pub const SPACE: u32 = 100_000;

    pub fn parse(s: &str) -> Option<Self> {
        let digits = s.strip_prefix(Self::PREFIX)?;
        (digits.len() == 5 && digits.bytes().all(|b| b.is_ascii_digit())).then(|| Self(s.to_owned()))
    }

    pub fn from_number(n: u32) -> Self {
        Self(format!("{}{:05}", Self::PREFIX, n % Self::SPACE))
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        Self::from_number(rng.gen_range(0..Self::SPACE))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SessionId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s).ok_or_else(|| format!("`{s}` is not a Guest_NNNNN session id"))
    }
}

impl From<SessionId> for String {
    fn from(id: SessionId) -> Self {
        id.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeRange {
    #[serde(rename = "18_24")]
    From18To24,
    #[serde(rename = "25_34")]
    From25To34,
    #[serde(rename = "35_44")]
    From35To44,
    #[serde(rename = "45_54")]
    From45To54,
    #[serde(rename = "55_64")]
    From55To64,
    #[serde(rename = "65_plus")]
    From65,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    NonBinary,
    SelfDescribed,
    PreferNotToSay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    HighSchool,
    Associate,
    Bachelors,
    Masters,
    Doctorate,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    Researcher,
    Clinician,
    Nurse,
    Teacher,
    Student,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CareRole {
    FamilyCaregiver,
    ProfessionalCaregiver,
    HealthcareProvider,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormalTraining {
    BasicTrainingWorkshop,
    Certificate,
    DegreeProgram,
    ContinuingEducation,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyFamiliarity {
    NotAtAll,
    Slightly,
    Moderately,
    Very,
    ExpertLevel,
}

/// Caregiving background questionnaire. Every answer is optional and the
/// schema has no place for names or contact details; unknown fields are
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSurvey {
    pub age_range: Option<AgeRange>,
    pub gender: Option<Gender>,
    pub education: Option<Education>,
    pub occupations: Vec<Occupation>,
    pub dementia_care_roles: Vec<CareRole>,
    pub formal_training: Vec<FormalTraining>,
    pub strategy_familiarity: Option<StrategyFamiliarity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealismRating {
    pub score: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<String>,
}

impl RealismRating {
    pub const MIN: i64 = 1;
    pub const MAX: i64 = 5;

    /// `None` when the score is outside 1..=5. Blank critiques are dropped.
    pub fn new(score: i64, critique: Option<&str>) -> Option<Self> {
        (Self::MIN..=Self::MAX).contains(&score).then(|| Self {
            score: score as u8,
            critique: critique.map(str::trim).filter(|c| !c.is_empty()).map(str::to_owned),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaregiverMode {
    FreeText,
    Selected,
}

impl CaregiverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FreeText => "free_text",
            Self::Selected => "selected",
        }
    }
}

/// What the caregiver sent, and whether it started from a suggestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CaregiverActionRepr")]
pub struct CaregiverAction {
    mode: CaregiverMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_strategy: Option<Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    original_option: Option<String>,
    final_text: String,
    edited: bool,
}

#[derive(Deserialize)]
struct CaregiverActionRepr {
    mode: CaregiverMode,
    #[serde(default)]
    selected_strategy: Option<Strategy>,
    #[serde(default)]
    original_option: Option<String>,
    final_text: String,
    edited: bool,
}

impl TryFrom<CaregiverActionRepr> for CaregiverAction {
    type Error = &'static str;

    fn try_from(r: CaregiverActionRepr) -> Result<Self, Self::Error> {
        let action = match (r.mode, r.selected_strategy, r.original_option) {
            (CaregiverMode::FreeText, None, None) => Self::free_text(r.final_text),
            (CaregiverMode::Selected, Some(s), Some(o)) => Self::selected(s, o, r.final_text),
            _ => return Err("caregiver action fields do not match its mode"),
        };
        if action.edited != r.edited {
            return Err("caregiver action `edited` flag is inconsistent with its texts");
        }
        Ok(action)
    }
}

impl CaregiverAction {
    pub fn free_text(text: impl Into<String>) -> Self {
        Self {
            mode: CaregiverMode::FreeText,
            selected_strategy: None,
            original_option: None,
            final_text: text.into(),
            edited: false,
        }
    }

    /// `edited` is derived from whether the sent text differs from the option.
    pub fn selected(strategy: Strategy, original: impl Into<String>, final_text: impl Into<String>) -> Self {
        let original = original.into();
        let final_text = final_text.into();
        Self {
            mode: CaregiverMode::Selected,
            selected_strategy: Some(strategy),
            edited: final_text != original,
            original_option: Some(original),
            final_text,
        }
    }

    pub fn mode(&self) -> CaregiverMode {
        self.mode
    }

    pub fn selected_strategy(&self) -> Option<Strategy> {
        self.selected_strategy
    }

    pub fn original_option(&self) -> Option<&str> {
        self.original_option.as_deref()
    }

    pub fn final_text(&self) -> &str {
        &self.final_text
    }

    pub fn edited(&self) -> bool {
        self.edited
    }
}

/// Caregiver reply as submitted by a client; the engine resolves the
/// original option text itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CaregiverInput {
    FreeText { text: String },
    Selected { strategy: Strategy, text: String },
}

impl CaregiverInput {
    pub fn text(&self) -> &str {
        match self {
            Self::FreeText { text } | Self::Selected { text, .. } => text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Configured,
    AwaitingRating,
    AwaitingCaregiver,
    Ended,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Configured => "configured",
            Self::AwaitingRating => "awaiting_rating",
            Self::AwaitingCaregiver => "awaiting_caregiver",
            Self::Ended => "ended",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    UserEnded,
    Reset,
    MaxTurns,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationState {
    pub session: SessionId,
    pub simulation_index: u32,
    pub scenario: ScenarioConfig,
    pub progress: TaskProgress,
    pub history: Vec<DialogueTurn>,
    pub phase: Phase,
    pub turn_index: u32,
    pub max_turns: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientTurn {
    pub turn_index: u32,
    #[serde(flatten)]
    pub utterance: PatientUtterance,
    pub generated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CaregiverOutcome {
    NextTurn { patient_turn: PatientTurn },
    Ended { reason: EndReason },
}

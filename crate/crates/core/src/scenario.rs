//! Scenario vocabulary: dementia stages and their behavioral profiles, care
//! settings, time spent in the setting, activities of daily living, and the
//! validated [`ScenarioConfig`] that conditions every generation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound (in characters) on any free-text scenario field.
pub const MAX_FREE_TEXT_CHARS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DementiaStage {
    Early,
    Middle,
    Late,
}

impl DementiaStage {
    pub const ALL: [DementiaStage; 3] = [Self::Early, Self::Middle, Self::Late];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Early => "early",
            Self::Middle => "middle",
            Self::Late => "late",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::Early => "early-stage (mild)",
            Self::Middle => "middle-stage (moderate)",
            Self::Late => "late-stage (severe)",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for DementiaStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prompt-level behaviors that define one Alzheimer's stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageProfile {
    pub stage: DementiaStage,
    pub memory_traits: &'static [&'static str],
    pub language_traits: &'static [&'static str],
    pub orientation_traits: &'static [&'static str],
    pub dependence_traits: &'static [&'static str],
    pub interaction_guidance: &'static [&'static str],
}

static EARLY: StageProfile = StageProfile {
    stage: DementiaStage::Early,
    memory_traits: &[
        "short-term memory lapses",
        "occasionally misplaces items",
        "may repeat themselves",
    ],
    language_traits: &[
        "word-finding difficulty",
        "speech is otherwise fluent and mostly coherent",
    ],
    orientation_traits: &[
        "generally oriented to time and place",
        "mild strain in executive function (planning and organizing)",
    ],
    dependence_traits: &[
        "maintains independence in basic ADLs",
        "benefits from gentle reminders and simplified structure for complex tasks",
    ],
    interaction_guidance: &[
        "responds well to reassurance when corrected",
        "may feel embarrassed or defensive about lapses",
    ],
};

static MIDDLE: StageProfile = StageProfile {
    stage: DementiaStage::Middle,
    memory_traits: &[
        "greater memory gaps, including forgetting personal details",
        "may not remember whether a task was already done",
    ],
    language_traits: &[
        "disrupted language and thought processes",
        "confuses words and fills gaps with confabulation-like statements",
    ],
    orientation_traits: &[
        "increased disorientation to time and place",
        "may show sundowning patterns or wandering",
    ],
    dependence_traits: &[
        "needs assistance with instrumental ADLs and some basic self-care tasks",
    ],
    interaction_guidance: &[
        "requires step-by-step prompting",
        "may show agitation, suspicion, or intermittent refusal of care",
    ],
};

static LATE: StageProfile = StageProfile {
    stage: DementiaStage::Late,
    memory_traits: &[
        "marked loss of situational awareness",
        "little recall of recent events or people",
    ],
    language_traits: &[
        "limited meaningful conversation",
        "communication is sparse (single words/sounds) and may be nonverbal",
    ],
    orientation_traits: &[
        "minimal initiation of activities",
        "responses are primarily reactive",
    ],
    dependence_traits: &[
        "fully dependent on others for basic ADLs",
        "may show discomfort through affect or behavior rather than words",
    ],
    interaction_guidance: &[
        "benefits from very simple one-step guidance",
        "responds to a calm tone and familiar cues",
    ],
};

/// Static behavioral profile for a stage.
pub fn stage_profile(stage: DementiaStage) -> &'static StageProfile {
    match stage {
        DementiaStage::Early => &EARLY,
        DementiaStage::Middle => &MIDDLE,
        DementiaStage::Late => &LATE,
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                Self::ALL.iter().copied().find(|v| v.as_str() == s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(CareSettingKind {
    OwnHome => "own_home",
    FamilyMemberHome => "family_member_home",
    AssistedLiving => "assisted_living",
    NursingHome => "nursing_home",
    Hospital => "hospital",
    Other => "other",
});

string_enum!(
    /// Time spent in the current care setting.
    SettingDuration {
        UnderOneMonth => "under_one_month",
        OneToSixMonths => "one_to_six_months",
        SixToTwelveMonths => "six_to_twelve_months",
        OverOneYear => "over_one_year",
    }
);

string_enum!(AdlKind {
    TakingMedicines => "taking_medicines",
    BrushingTeeth => "brushing_teeth",
    EatingMeals => "eating_meals",
    GettingOutOfBed => "getting_out_of_bed",
    Toileting => "toileting",
    WalkingExercise => "walking_exercise",
    Dressing => "dressing",
    BathingShowering => "bathing_showering",
    Other => "other",
});

impl SettingDuration {
    /// How long the person has been in the setting, phrased as familiarity.
    pub fn familiarity_phrase(self) -> &'static str {
        match self {
            Self::UnderOneMonth => {
                "has been there for less than a month; the surroundings, people, and routines are still unfamiliar and may feel disorienting"
            }
            Self::OneToSixMonths => {
                "has been there for one to six months; some routines are becoming familiar but the place may still feel new"
            }
            Self::SixToTwelveMonths => {
                "has been there for six to twelve months; daily routines and the layout are mostly familiar"
            }
            Self::OverOneYear => {
                "has been there for more than a year; the surroundings and daily routine are long-standing and familiar"
            }
        }
    }
}

/// A kind plus the free text that is required exactly when the kind is `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "TaggedRepr<K>", bound(deserialize = "K: Deserialize<'de> + OtherKind"))]
pub struct Tagged<K> {
    kind: K,
    #[serde(skip_serializing_if = "Option::is_none")]
    other_text: Option<String>,
}

#[derive(Deserialize)]
struct TaggedRepr<K> {
    kind: K,
    #[serde(default)]
    other_text: Option<String>,
}

/// Implemented by kind enums that carry an `Other` escape hatch.
pub trait OtherKind: Copy + PartialEq {
    const OTHER: Self;
}

impl OtherKind for CareSettingKind {
    const OTHER: Self = CareSettingKind::Other;
}

impl OtherKind for AdlKind {
    const OTHER: Self = AdlKind::Other;
}

impl<K: OtherKind> TryFrom<TaggedRepr<K>> for Tagged<K> {
    type Error = String;

    fn try_from(repr: TaggedRepr<K>) -> Result<Self, Self::Error> {
        if repr.kind == K::OTHER {
            match repr.other_text {
                Some(t) if !t.trim().is_empty() => Ok(Self::other(t)),
                _ => Err("other_text is required when kind is \"other\"".into()),
            }
        } else {
            Ok(Self::known(repr.kind))
        }
    }
}

impl<K: OtherKind> Tagged<K> {
    /// Panics if `kind` is the `Other` variant; use [`Tagged::other`] for that.
    pub fn known(kind: K) -> Self {
        assert!(kind != K::OTHER, "use Tagged::other for the Other kind");
        Self { kind, other_text: None }
    }

    pub fn other(text: impl Into<String>) -> Self {
        let text = text.into().trim().to_owned();
        Self { kind: K::OTHER, other_text: Some(text) }
    }

    pub fn kind(&self) -> K {
        self.kind
    }

    pub fn other_text(&self) -> Option<&str> {
        self.other_text.as_deref()
    }
}

pub type CareSetting = Tagged<CareSettingKind>;
pub type Adl = Tagged<AdlKind>;

impl CareSetting {
    pub fn description(&self) -> String {
        match self.kind {
            CareSettingKind::OwnHome => "their own home".into(),
            CareSettingKind::FamilyMemberHome => "a family member's home".into(),
            CareSettingKind::AssistedLiving => "an assisted living facility".into(),
            CareSettingKind::NursingHome => "a nursing home".into(),
            CareSettingKind::Hospital => "a hospital".into(),
            CareSettingKind::Other => self.other_text.clone().unwrap_or_default(),
        }
    }

    /// Stable single-token form used in exports: the kind string, or `other:<text>`.
    pub fn export_token(&self) -> String {
        export_token(self.kind.as_str(), self.other_text())
    }
}

impl Adl {
    pub fn display_name(&self) -> String {
        match self.kind {
            AdlKind::TakingMedicines => "taking medicines".into(),
            AdlKind::BrushingTeeth => "brushing teeth".into(),
            AdlKind::EatingMeals => "eating a meal".into(),
            AdlKind::GettingOutOfBed => "getting out of bed".into(),
            AdlKind::Toileting => "toileting".into(),
            AdlKind::WalkingExercise => "walking / exercise".into(),
            AdlKind::Dressing => "getting dressed".into(),
            AdlKind::BathingShowering => "bathing / showering".into(),
            AdlKind::Other => self.other_text.clone().unwrap_or_default(),
        }
    }

    pub fn export_token(&self) -> String {
        export_token(self.kind.as_str(), self.other_text())
    }
}

fn export_token(kind: &str, other: Option<&str>) -> String {
    match other {
        Some(t) => format!("{kind}:{t}"),
        None => kind.to_owned(),
    }
}

/// Inverse of `export_token` for care settings and ADLs.
pub fn parse_export_token<K: OtherKind>(
    token: &str,
    parse_kind: impl Fn(&str) -> Option<K>,
) -> Option<Tagged<K>> {
    match token.split_once(':') {
        Some(("other", text)) if !text.trim().is_empty() => Some(Tagged::other(text)),
        Some(_) => None,
        None => parse_kind(token).filter(|k| *k != K::OTHER).map(Tagged::known),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub stage: DementiaStage,
    pub care_setting: CareSetting,
    pub setting_duration: SettingDuration,
    pub adl: Adl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenges: Option<String>,
}

/// Unvalidated scenario fields as submitted by a client.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioInput {
    pub stage: Option<String>,
    pub care_setting: Option<String>,
    pub care_setting_other: Option<String>,
    pub setting_duration: Option<String>,
    pub adl: Option<String>,
    pub adl_other: Option<String>,
    pub challenges: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", content = "field", rename_all = "snake_case")]
pub enum FieldError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("`{0}` has an unrecognized value")]
    InvalidValue(&'static str),
    #[error("free text is required for `{0}` when \"other\" is selected")]
    OtherTextRequired(&'static str),
    #[error("`{0}` exceeds {MAX_FREE_TEXT_CHARS} characters")]
    TextTooLong(&'static str),
}

/// Field-by-field validation report.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ScenarioErrors(pub Vec<FieldError>);

fn clean_text(text: Option<&str>) -> Option<String> {
    text.map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned)
}

fn parse_tagged<K: OtherKind>(
    kind: Option<&str>,
    other: Option<&str>,
    kind_field: &'static str,
    other_field: &'static str,
    parse: impl Fn(&str) -> Option<K>,
    errors: &mut Vec<FieldError>,
) -> Option<Tagged<K>> {
    let Some(raw) = clean_text(kind) else {
        errors.push(FieldError::MissingField(kind_field));
        return None;
    };
    let Some(kind) = parse(&raw.to_ascii_lowercase()) else {
        errors.push(FieldError::InvalidValue(kind_field));
        return None;
    };
    if kind != K::OTHER {
        return Some(Tagged::known(kind));
    }
    match clean_text(other) {
        None => {
            errors.push(FieldError::OtherTextRequired(kind_field));
            None
        }
        Some(t) if t.chars().count() > MAX_FREE_TEXT_CHARS => {
            errors.push(FieldError::TextTooLong(other_field));
            None
        }
        Some(t) => Some(Tagged::other(t)),
    }
}

fn parse_enum<T>(
    raw: Option<&str>,
    field: &'static str,
    parse: impl Fn(&str) -> Option<T>,
    errors: &mut Vec<FieldError>,
) -> Option<T> {
    let Some(raw) = clean_text(raw) else {
        errors.push(FieldError::MissingField(field));
        return None;
    };
    let parsed = parse(&raw.to_ascii_lowercase());
    if parsed.is_none() {
        errors.push(FieldError::InvalidValue(field));
    }
    parsed
}

/// Validates and normalizes raw scenario fields.
///
/// Free text is trimmed, empty free text is treated as absent, and `other`
/// text supplied for a non-`other` kind is dropped.
pub fn validate_scenario(input: &ScenarioInput) -> Result<ScenarioConfig, ScenarioErrors> {
    let mut errors = Vec::new();

    let stage = parse_enum(input.stage.as_deref(), "stage", DementiaStage::parse, &mut errors);
    let care_setting = parse_tagged(
        input.care_setting.as_deref(),
        input.care_setting_other.as_deref(),
        "care_setting",
        "care_setting_other",
        CareSettingKind::parse,
        &mut errors,
    );
    let setting_duration = parse_enum(
        input.setting_duration.as_deref(),
        "setting_duration",
        SettingDuration::parse,
        &mut errors,
    );
    let adl = parse_tagged(
        input.adl.as_deref(),
        input.adl_other.as_deref(),
        "adl",
        "adl_other",
        AdlKind::parse,
        &mut errors,
    );
    let challenges = clean_text(input.challenges.as_deref());
    if challenges.as_ref().is_some_and(|c| c.chars().count() > MAX_FREE_TEXT_CHARS) {
        errors.push(FieldError::TextTooLong("challenges"));
    }

    match (stage, care_setting, setting_duration, adl) {
        (Some(stage), Some(care_setting), Some(setting_duration), Some(adl)) if errors.is_empty() => {
            Ok(ScenarioConfig { stage, care_setting, setting_duration, adl, challenges })
        }
        _ => Err(ScenarioErrors(errors)),
    }
}

impl ScenarioConfig {
    pub fn to_input(&self) -> ScenarioInput {
        ScenarioInput {
            stage: Some(self.stage.as_str().into()),
            care_setting: Some(self.care_setting.kind().as_str().into()),
            care_setting_other: self.care_setting.other_text().map(Into::into),
            setting_duration: Some(self.setting_duration.as_str().into()),
            adl: Some(self.adl.kind().as_str().into()),
            adl_other: self.adl.other_text().map(Into::into),
            challenges: self.challenges.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioErrors> {
        validate_scenario(&self.to_input()).map(|_| ())
    }
}

//! Deterministic prompt construction for patient turns and caregiver
//! suggestions.
//!
//! The templates live in `prompts/` and are versioned together through
//! [`PROMPT_VERSION`], which is written into every turn record.

use serde::{Deserialize, Serialize};

use crate::scenario::{stage_profile, ScenarioConfig, ScenarioErrors};
use crate::strategy::{render_lines, Strategy};
use crate::task_plan::TaskProgress;
use crate::utterance::PatientUtterance;

pub const PROMPT_VERSION: &str = "adlsim-prompts/1";

/// Default number of recent dialogue turns shown to the model.
pub const DEFAULT_WINDOW: usize = 6;

const PATIENT_TEMPLATE: &str = include_str!("../prompts/patient_v1.txt");
const SUGGESTIONS_TEMPLATE: &str = include_str!("../prompts/suggestions_v1.txt");
const SCENE_TEMPLATE: &str = include_str!("../prompts/scene_v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Patient,
    Caregiver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub speaker: Speaker,
    pub text: String,
    pub turn_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub messages: Vec<ChatMessage>,
}

impl PromptBundle {
    /// System text (when non-empty) followed by the messages.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let system = (!self.system_text.is_empty()).then(|| ChatMessage::new(Role::System, &self.system_text));
        system.into_iter().chain(self.messages.iter().cloned()).collect()
    }
}

/// The last `min(n, history.len())` turns, in order.
pub fn window_history(history: &[DialogueTurn], n: usize) -> &[DialogueTurn] {
    &history[history.len().saturating_sub(n)..]
}

/// Single-pass `{{name}}` substitution; values are never re-scanned.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").expect("unterminated placeholder in prompt template");
        let key = &after[..end];
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .unwrap_or_else(|| panic!("no value for prompt placeholder `{key}`"))
            .1;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    out
}

struct SharedContext {
    stage_name: String,
    care_setting: String,
    familiarity: &'static str,
    challenges_line: String,
    adl: String,
    current_step: String,
    next_step: String,
}

fn shared_context(scenario: &ScenarioConfig, progress: &TaskProgress) -> SharedContext {
    let ctx = progress.context();
    SharedContext {
        stage_name: scenario.stage.display_name().to_owned(),
        care_setting: scenario.care_setting.description(),
        familiarity: scenario.setting_duration.familiarity_phrase(),
        challenges_line: scenario
            .challenges
            .as_ref()
            .map(|c| format!("- Task-specific challenges: {c}\n"))
            .unwrap_or_default(),
        adl: scenario.adl.display_name(),
        current_step: ctx.current_step,
        next_step: ctx.next_step.unwrap_or_else(|| "none (this is the final step)".to_owned()),
    }
}

/// Builds the patient-turn prompt: role, scenario context with stage traits,
/// ADL, current/next step, and formatting constraints in the system text;
/// windowed history as messages with caregiver turns as `user` and patient
/// turns as `assistant`.
pub fn build_patient_prompt(
    scenario: &ScenarioConfig,
    progress: &TaskProgress,
    history: &[DialogueTurn],
    window: usize,
) -> Result<PromptBundle, ScenarioErrors> {
    scenario.validate()?;
    let ctx = shared_context(scenario, progress);
    let profile = stage_profile(scenario.stage);
    let join = |traits: &[&str]| traits.join("; ");
    let memory = join(profile.memory_traits);
    let language = join(profile.language_traits);
    let orientation = join(profile.orientation_traits);
    let dependence = join(profile.dependence_traits);
    let guidance = join(profile.interaction_guidance);

    let system_text = fill(
        PATIENT_TEMPLATE,
        &[
            ("stage_name", &ctx.stage_name),
            ("care_setting", &ctx.care_setting),
            ("familiarity", ctx.familiarity),
            ("challenges_line", &ctx.challenges_line),
            ("memory_traits", &memory),
            ("language_traits", &language),
            ("orientation_traits", &orientation),
            ("dependence_traits", &dependence),
            ("interaction_guidance", &guidance),
            ("adl", &ctx.adl),
            ("current_step", &ctx.current_step),
            ("next_step", &ctx.next_step),
        ],
    );

    let windowed = window_history(history, window.max(1));
    let messages = if windowed.is_empty() {
        vec![ChatMessage::new(Role::User, fill(SCENE_TEMPLATE, &[("adl", &ctx.adl)]))]
    } else {
        windowed
            .iter()
            .map(|t| {
                let role = match t.speaker {
                    Speaker::Caregiver => Role::User,
                    Speaker::Patient => Role::Assistant,
                };
                ChatMessage::new(role, &t.text)
            })
            .collect()
    };
    Ok(PromptBundle { system_text, messages })
}

/// Builds the four-strategy caregiver suggestion prompt.
pub fn build_suggestion_prompt(
    scenario: &ScenarioConfig,
    progress: &TaskProgress,
    history: &[DialogueTurn],
    window: usize,
    last_patient: &PatientUtterance,
) -> Result<PromptBundle, ScenarioErrors> {
    scenario.validate()?;
    let ctx = shared_context(scenario, progress);
    let definitions = Strategy::ALL
        .iter()
        .map(|s| format!("- {} ({}): {}", s.label(), s.focus(), s.definition()))
        .collect::<Vec<_>>()
        .join("\n");
    let format_lines = render_lines(Strategy::ALL.iter().map(|s| (*s, "<suggestion>")));

    let system_text = fill(
        SUGGESTIONS_TEMPLATE,
        &[
            ("stage_name", &ctx.stage_name),
            ("care_setting", &ctx.care_setting),
            ("familiarity", ctx.familiarity),
            ("challenges_line", &ctx.challenges_line),
            ("adl", &ctx.adl),
            ("current_step", &ctx.current_step),
            ("next_step", &ctx.next_step),
            ("strategy_definitions", &definitions),
            ("format_lines", &format_lines),
        ],
    );

    let mut body = String::from("Recent conversation:\n");
    let windowed = window_history(history, window.max(1));
    if windowed.is_empty() {
        body.push_str("(none yet)\n");
    }
    for turn in windowed {
        let who = match turn.speaker {
            Speaker::Caregiver => "CAREGIVER",
            Speaker::Patient => "PERSON",
        };
        body.push_str(&format!("{who}: {}\n", turn.text));
    }
    body.push_str(&format!("\nMost recent response from the person: {}", last_patient.raw));

    Ok(PromptBundle { system_text, messages: vec![ChatMessage::new(Role::User, body)] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::*;
    use crate::task_plan::plan_for;
    use crate::utterance::parse_patient_text;
    use proptest::prelude::*;
    use crate::strategy::Strategy;

    fn scenario(stage: DementiaStage, adl: AdlKind) -> ScenarioConfig {
        ScenarioConfig {
            stage,
            care_setting: CareSetting::known(CareSettingKind::OwnHome),
            setting_duration: SettingDuration::OverOneYear,
            adl: Adl::known(adl),
            challenges: None,
        }
    }

    fn history(n: u32) -> Vec<DialogueTurn> {
        (0..n)
            .map(|i| DialogueTurn {
                speaker: if i % 2 == 0 { Speaker::Patient } else { Speaker::Caregiver },
                text: format!("utterance {i}"),
                turn_index: i / 2 + 1,
            })
            .collect()
    }

    #[test]
    fn window_takes_suffix() {
        let h = history(10);
        assert_eq!(window_history(&h, 6), &h[4..]);
        assert_eq!(window_history(&h[..3], 6), &h[..3]);
        assert!(window_history(&[], 6).is_empty());
    }

    #[test]
    fn patient_prompt_embeds_full_context() {
        let sc = scenario(DementiaStage::Middle, AdlKind::TakingMedicines);
        let progress = TaskProgress::start(plan_for(&sc.adl));
        let bundle = build_patient_prompt(&sc, &progress, &[], DEFAULT_WINDOW).unwrap();
        let text = &bundle.system_text;
        for needle in [
            "## Role",
            "## Scenario context",
            "## Activity of daily living",
            "## Task progress",
            "## Conversation",
            "## Formatting constraints",
            "disorientation to time and place",
            "more than a year",
            "taking medicines",
            &progress.plan().steps[0],
            &progress.plan().steps[1],
            "1-3 sentences",
            "No speaker labels",
            "their own home",
        ] {
            assert!(text.contains(needle), "missing {needle:?}");
        }
        assert!(!text.contains("{{"));
        assert_eq!(bundle.messages.len(), 1);
        assert_eq!(bundle.messages[0].role, Role::User);
        assert!(bundle.messages[0].content.contains("taking medicines"));
    }

    #[test]
    fn history_is_windowed_and_role_mapped() {
        let sc = scenario(DementiaStage::Middle, AdlKind::TakingMedicines);
        let progress = TaskProgress::start(plan_for(&sc.adl));
        let bundle = build_patient_prompt(&sc, &progress, &history(8), 6).unwrap();
        assert_eq!(bundle.messages.len(), 6);
        assert_eq!(bundle.messages[0].content, "utterance 2");
        assert_eq!(bundle.messages[0].role, Role::Assistant);
        assert_eq!(bundle.messages[5].role, Role::User);
    }

    #[test]
    fn late_stage_mentions_sparse_communication() {
        let sc = scenario(DementiaStage::Late, AdlKind::EatingMeals);
        let progress = TaskProgress::start(plan_for(&sc.adl));
        let bundle = build_patient_prompt(&sc, &progress, &[], 6).unwrap();
        assert!(bundle.system_text.contains("single words/sounds"));
    }

    #[test]
    fn final_step_has_no_next_step() {
        let sc = scenario(DementiaStage::Early, AdlKind::BrushingTeeth);
        let plan = plan_for(&sc.adl);
        let last = TaskProgress::at(plan.clone(), plan.steps.len() - 1).unwrap();
        let bundle = build_patient_prompt(&sc, &last, &[], 6).unwrap();
        assert!(bundle.system_text.contains("Next step: none (this is the final step)"));
    }

    #[test]
    fn challenges_are_injected_and_placeholders_in_user_text_are_inert() {
        let mut sc = scenario(DementiaStage::Early, AdlKind::Dressing);
        sc.challenges = Some("refuses help {{adl}}".into());
        let progress = TaskProgress::start(plan_for(&sc.adl));
        let bundle = build_patient_prompt(&sc, &progress, &[], 6).unwrap();
        assert!(bundle.system_text.contains("- Task-specific challenges: refuses help {{adl}}\n"));
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut sc = scenario(DementiaStage::Early, AdlKind::Dressing);
        sc.challenges = Some("x".repeat(MAX_FREE_TEXT_CHARS + 1));
        let progress = TaskProgress::start(plan_for(&sc.adl));
        assert!(build_patient_prompt(&sc, &progress, &[], 6).is_err());
    }

    #[test]
    fn suggestion_prompt_defines_strategies_and_format() {
        let sc = scenario(DementiaStage::Middle, AdlKind::TakingMedicines);
        let progress = TaskProgress::start(plan_for(&sc.adl));
        let last = parse_patient_text("I already took them. (looks away)");
        let bundle = build_suggestion_prompt(&sc, &progress, &history(3), 6, &last).unwrap();
        let text = &bundle.system_text;
        for s in Strategy::ALL {
            assert!(text.contains(s.label()));
            assert!(text.contains(&format!("{}: <suggestion>", s.label())));
        }
        assert!(text.contains("break the ADL into manageable steps"));
        assert!(text.contains("intention-to-fulfill"));
        assert!(text.contains("offer bounded choices"));
        assert!(text.contains("exactly four lines"));
        assert!(text.contains("1-2 short sentences"));
        assert!(bundle.messages[0].content.ends_with("I already took them. (looks away)"));
    }

    #[test]
    fn to_messages_prepends_system() {
        let b = PromptBundle { system_text: "sys".into(), messages: vec![ChatMessage::new(Role::User, "hi")] };
        assert_eq!(b.to_messages()[0], ChatMessage::new(Role::System, "sys"));
        let b = PromptBundle { system_text: String::new(), messages: vec![ChatMessage::new(Role::User, "hi")] };
        assert_eq!(b.to_messages().len(), 1);
    }

    proptest! {
        #[test]
        fn window_is_bounded_suffix(len in 0u32..40, n in 1usize..20) {
            let h = history(len);
            let w = window_history(&h, n);
            prop_assert!(w.len() <= n);
            prop_assert_eq!(w.len(), n.min(h.len()));
            prop_assert!(h.ends_with(w));
        }
    }
}

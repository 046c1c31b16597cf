//! Canonical prompt scenarios, their golden renderings, and the context
//! elements every patient prompt must carry.

use std::path::PathBuf;

use adlsim_core::prompt::{
    build_patient_prompt, build_suggestion_prompt, window_history, DialogueTurn, PromptBundle, Role, Speaker,
    DEFAULT_WINDOW,
};
use adlsim_core::scenario::*;
use adlsim_core::task_plan::{plan_for, TaskProgress};
use adlsim_core::utterance::parse_patient_text;

pub struct Canonical {
    pub name: &'static str,
    pub scenario: ScenarioConfig,
    pub progress: TaskProgress,
    pub history: Vec<DialogueTurn>,
}

fn dialogue(lines: &[&str]) -> Vec<DialogueTurn> {
    lines
        .iter()
        .enumerate()
        .map(|(i, text)| DialogueTurn {
            speaker: if i % 2 == 0 { Speaker::Patient } else { Speaker::Caregiver },
            text: (*text).to_owned(),
            turn_index: i as u32 / 2 + 1,
        })
        .collect()
}

pub fn canonical_scenarios() -> Vec<Canonical> {
    let meds = ScenarioConfig {
        stage: DementiaStage::Middle,
        care_setting: CareSetting::known(CareSettingKind::OwnHome),
        setting_duration: SettingDuration::OverOneYear,
        adl: Adl::known(AdlKind::TakingMedicines),
        challenges: None,
    };
    let teeth = ScenarioConfig {
        stage: DementiaStage::Early,
        care_setting: CareSetting::known(CareSettingKind::AssistedLiving),
        setting_duration: SettingDuration::UnderOneMonth,
        adl: Adl::known(AdlKind::BrushingTeeth),
        challenges: Some("Insists the teeth were already brushed this morning".into()),
    };
    let meals = ScenarioConfig {
        stage: DementiaStage::Late,
        care_setting: CareSetting::known(CareSettingKind::NursingHome),
        setting_duration: SettingDuration::SixToTwelveMonths,
        adl: Adl::known(AdlKind::EatingMeals),
        challenges: None,
    };
    let meals_plan = plan_for(&meals.adl);
    let last = meals_plan.steps.len() - 1;
    vec![
        Canonical {
            name: "middle_own_home_taking_medicines",
            progress: TaskProgress::start(plan_for(&meds.adl)),
            scenario: meds,
            history: vec![],
        },
        Canonical {
            name: "early_assisted_living_brushing_teeth",
            progress: TaskProgress::start(plan_for(&teeth.adl)).advance(),
            scenario: teeth,
            history: dialogue(&[
                "I already did that, dear. (waves hand)",
                "Let's just check together, shall we? Your toothbrush is right here.",
            ]),
        },
        Canonical {
            name: "late_nursing_home_eating_meals",
            progress: TaskProgress::at(meals_plan, last).expect("last step exists"),
            scenario: meals,
            history: dialogue(&[
                "Mm. (stares at the plate)",
                "Here is your soup, Rose. It's warm.",
                "No. (turns head away)",
                "That's okay. We can go slowly.",
                "Hot? (touches the bowl)",
                "It's just warm. Would you like a small sip?",
                "Mm. (opens mouth a little)",
                "Lovely. One more spoonful?",
                "Tired. (closes eyes)",
                "Let's finish with some water, then you can rest.",
            ]),
        },
    ]
}

pub fn render(bundle: &PromptBundle) -> String {
    let mut out = format!("=== system ===\n{}\n=== messages ===\n", bundle.system_text);
    for m in &bundle.messages {
        out.push_str(&format!("[{}]\n{}\n", m.role.as_str(), m.content));
    }
    out
}

/// Both prompts of one scenario as a single golden document.
pub fn golden_text(c: &Canonical) -> String {
    let patient = build_patient_prompt(&c.scenario, &c.progress, &c.history, DEFAULT_WINDOW).expect("valid scenario");
    let last_patient = c
        .history
        .iter()
        .rev()
        .find(|t| t.speaker == Speaker::Patient)
        .map_or_else(|| parse_patient_text("Hello? (looks up)"), |t| parse_patient_text(&t.text));
    let suggestions = build_suggestion_prompt(&c.scenario, &c.progress, &c.history, DEFAULT_WINDOW, &last_patient)
        .expect("valid scenario");
    format!("##### patient prompt\n{}##### suggestion prompt\n{}", render(&patient), render(&suggestions))
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).parent().expect("crates dir").join("core/tests/golden")
}

/// The context elements of the patient prompt: role, severity, setting,
/// duration, ADL, task progress, formatting constraints, windowed history
/// and the latest caregiver message.
pub fn check_context_elements(c: &Canonical, bundle: &PromptBundle) -> Result<(), String> {
    let sys = &bundle.system_text;
    let ctx = c.progress.context();
    let mut required = vec![
        ("role", "## Role".to_owned()),
        ("severity", c.scenario.stage.display_name().to_owned()),
        ("care setting", c.scenario.care_setting.description()),
        ("duration", c.scenario.setting_duration.familiarity_phrase().to_owned()),
        ("adl", c.scenario.adl.display_name()),
        ("current step", format!("Current step: {}", ctx.current_step)),
        ("formatting", "1-3 sentences".to_owned()),
        ("cue format", "in parentheses".to_owned()),
    ];
    if let Some(next) = &ctx.next_step {
        required.push(("next step", format!("Next step: {next}")));
    }
    for (what, needle) in required {
        if !sys.contains(&needle) {
            return Err(format!("{}: system text lacks {what} ({needle:?})", c.name));
        }
    }

    let window = window_history(&c.history, DEFAULT_WINDOW);
    if window.is_empty() {
        return if bundle.messages.len() == 1 && bundle.messages[0].role == Role::User {
            Ok(())
        } else {
            Err(format!("{}: opening prompt needs exactly one scene message", c.name))
        };
    }
    if bundle.messages.len() != window.len() {
        return Err(format!("{}: {} messages for a window of {}", c.name, bundle.messages.len(), window.len()));
    }
    for (m, t) in bundle.messages.iter().zip(window) {
        let role = if t.speaker == Speaker::Caregiver { Role::User } else { Role::Assistant };
        if m.role != role || m.content != t.text {
            return Err(format!("{}: message does not match windowed turn {:?}", c.name, t));
        }
    }
    let last_caregiver = c.history.iter().rev().find(|t| t.speaker == Speaker::Caregiver);
    match (last_caregiver, bundle.messages.last()) {
        (Some(t), Some(m)) if m.role == Role::User && m.content == t.text => Ok(()),
        _ => Err(format!("{}: latest caregiver message is not the final message", c.name)),
    }
}

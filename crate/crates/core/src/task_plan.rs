//! Stepwise ADL task plans and the per-turn progress context that keeps
//! patient generation anchored to the current and next substep.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Adl, AdlKind};

pub const MIN_PLAN_STEPS: usize = 3;
pub const MAX_PLAN_STEPS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub adl: Adl,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskProgress {
    plan: TaskPlan,
    current_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgressContext {
    pub current_step: String,
    pub next_step: Option<String>,
}

impl TaskProgress {
    pub fn start(plan: TaskPlan) -> Self {
        assert!(!plan.steps.is_empty(), "task plan must have at least one step");
        Self { plan, current_index: 0 }
    }

    /// `None` when `index` is outside the plan.
    pub fn at(plan: TaskPlan, index: usize) -> Option<Self> {
        (index < plan.steps.len()).then_some(Self { plan, current_index: index })
    }

    pub fn plan(&self) -> &TaskPlan {
        &self.plan
    }

    pub fn current_index(&self) -> usize {
        self.current_index
    }

    pub fn is_final_step(&self) -> bool {
        self.current_index + 1 == self.plan.steps.len()
    }

    pub fn context(&self) -> ProgressContext {
        progress_context(self)
    }

    /// Moves to the next step, staying on the final step once reached.
    #[must_use]
    pub fn advance(&self) -> Self {
        advance(self)
    }
}

pub fn progress_context(progress: &TaskProgress) -> ProgressContext {
    let steps = &progress.plan.steps;
    ProgressContext {
        current_step: steps[progress.current_index].clone(),
        next_step: steps.get(progress.current_index + 1).cloned(),
    }
}

pub fn advance(progress: &TaskProgress) -> TaskProgress {
    let last = progress.plan.steps.len() - 1;
    TaskProgress {
        plan: progress.plan.clone(),
        current_index: (progress.current_index + 1).min(last),
    }
}

fn builtin_steps(kind: AdlKind) -> &'static [&'static str] {
    match kind {
        AdlKind::TakingMedicines => &[
            "Go to the table where the medications are kept",
            "Locate today's pill organizer",
            "Pour a glass of water",
            "Open today's compartment and take out the pills",
            "Take the pills one at a time with sips of water",
            "Confirm all of today's pills have been taken",
            "Close the organizer and put it away",
        ],
        AdlKind::BrushingTeeth => &[
            "Walk to the bathroom sink",
            "Pick up the toothbrush and toothpaste",
            "Put toothpaste on the toothbrush",
            "Brush the top and bottom teeth",
            "Rinse the mouth with water",
            "Rinse the toothbrush and put everything away",
        ],
        AdlKind::EatingMeals => &[
            "Come to the table and sit down",
            "Put the napkin on the lap",
            "Pick up the fork or spoon",
            "Take a bite of food and chew",
            "Take a sip of the drink",
            "Keep eating until the plate is finished",
            "Put the utensils down and wipe the mouth",
        ],
        AdlKind::GettingOutOfBed => &[
            "Wake up and turn toward the caregiver",
            "Pull back the blanket",
            "Roll onto the side",
            "Push up to sit on the edge of the bed",
            "Put both feet flat on the floor",
            "Stand up with support",
            "Finish by taking the first steps toward the chair",
        ],
        AdlKind::Toileting => &[
            "Walk to the bathroom",
            "Lower clothing",
            "Sit down on the toilet",
            "Use the toilet",
            "Wipe and flush",
            "Pull clothing back up",
            "Wash and dry the hands to finish",
        ],
        AdlKind::WalkingExercise => &[
            "Put on walking shoes",
            "Stand up from the chair",
            "Walk to the door",
            "Walk a short loop at a comfortable pace",
            "Pause to rest if needed",
            "Walk back and sit down to finish",
        ],
        AdlKind::Dressing => &[
            "Choose the clothes for today",
            "Take off the pajama top",
            "Put arms into the shirt sleeves",
            "Button or pull down the shirt",
            "Put on the pants one leg at a time",
            "Put on socks and shoes",
            "Check the outfit in the mirror to finish",
        ],
        AdlKind::BathingShowering => &[
            "Go to the bathroom and gather a towel",
            "Check that the water is a comfortable temperature",
            "Undress and step into the shower or tub",
            "Wash the body with soap",
            "Rinse off the soap",
            "Step out carefully and dry off with the towel",
            "Put on clean clothes to finish",
        ],
        AdlKind::Other => &[],
    }
}

/// Three-step plan used for free-text `Other` activities.
pub fn generic_plan(adl: &Adl) -> TaskPlan {
    let task = adl.display_name();
    TaskPlan {
        adl: adl.clone(),
        steps: vec![
            format!("Begin the task: {task}"),
            format!("Continue the task: {task}"),
            format!("Finish the task: {task}"),
        ],
    }
}

/// Built-in plan for `adl`. Total over all ADL values.
pub fn plan_for(adl: &Adl) -> TaskPlan {
    match adl.kind() {
        AdlKind::Other => generic_plan(adl),
        kind => TaskPlan {
            adl: adl.clone(),
            steps: builtin_steps(kind).iter().map(|s| (*s).to_owned()).collect(),
        },
    }
}

#[derive(Debug, Error)]
pub enum PlanFileError {
    #[error("cannot read plan file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse plan file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("plan for `{adl}` must have between {MIN_PLAN_STEPS} and {MAX_PLAN_STEPS} non-empty steps")]
    StepCount { adl: AdlKind },
    #[error("plan for `other` cannot be overridden; free-text activities use the generic plan")]
    OtherOverride,
    #[error("duplicate plan for `{0}`")]
    Duplicate(AdlKind),
}

#[derive(Deserialize)]
struct PlanFile {
    #[serde(default)]
    plan: Vec<PlanDocument>,
}

#[derive(Deserialize)]
struct PlanDocument {
    adl: AdlKind,
    steps: Vec<String>,
}

/// Plans keyed by ADL kind: built-in defaults, optionally overridden from a
/// TOML file with one `[[plan]]` table per ADL.
#[derive(Debug, Clone, Default)]
pub struct PlanLibrary {
    overrides: HashMap<AdlKind, Vec<String>>,
}

impl PlanLibrary {
    pub fn builtin() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PlanFileError> {
        let file: PlanFile = toml::from_str(text)?;
        let mut overrides = HashMap::new();
        for doc in file.plan {
            if doc.adl == AdlKind::Other {
                return Err(PlanFileError::OtherOverride);
            }
            let steps: Vec<String> = doc.steps.iter().map(|s| s.trim().to_owned()).collect();
            if !(MIN_PLAN_STEPS..=MAX_PLAN_STEPS).contains(&steps.len()) || steps.iter().any(String::is_empty) {
                return Err(PlanFileError::StepCount { adl: doc.adl });
            }
            if overrides.insert(doc.adl, steps).is_some() {
                return Err(PlanFileError::Duplicate(doc.adl));
            }
        }
        Ok(Self { overrides })
    }

    pub fn from_file(path: &Path) -> Result<Self, PlanFileError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn plan_for(&self, adl: &Adl) -> TaskPlan {
        match self.overrides.get(&adl.kind()) {
            Some(steps) => TaskPlan { adl: adl.clone(), steps: steps.clone() },
            None => plan_for(adl),
        }
    }
}

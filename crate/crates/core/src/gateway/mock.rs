//! Offline backend. Output is a pure function of the scenario, request kind
//! and turn index, hashed with SHA-256 so it is stable across processes and
//! toolchains.

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::{BackendKind, ChatBackend, ChatRequest, ChatResponse, GatewayError, RequestKind};
use crate::scenario::{AdlKind, DementiaStage};

const EARLY: &[&str] = &[
    "I can do this myself, I just need a second to find the... the word. Where did I leave my {object}? (taps fingers on the table)",
    "Oh, is it time for that already? I was sure I had done it. (smiles, a little embarrassed)",
    "Give me a minute, I know how this goes. (pauses, rubbing forehead)",
    "Sorry, what were we doing again? Right, the {object}. (nods slowly)",
];

const MIDDLE: &[&str] = &[
    "Who said I need the {object}? I already did that this morning, I think. (looks around the room, frowning)",
    "This isn't my house, is it? I want to go home now. (grips the armrest)",
    "Mother will be here soon, she always helps me with the... the thing. (stares at the {object})",
    "I don't want to. Not right now. (pushes hand away)",
];

const LATE: &[&str] = &[
    "No... no. (turns head away)",
    "Mm. (stares at the {object})",
    "Cold. (shivers, pulls blanket closer)",
    "Help... me. (reaches for caregiver's hand)",
];

const RECOGNITION: &[&str] = &[
    "It's so good to see you this morning. I know you like doing things your own way.",
    "Hello there, it's me, your helper. You always keep such a tidy home.",
];
const NEGOTIATION: &[&str] = &[
    "Would you like to start with the {object} now, or rest for a minute first?",
    "Is it okay if I help you with the {object}, or would you rather try first?",
];
const FACILITATION: &[&str] = &[
    "Let's take it one step at a time. I'll put the {object} right here for you.",
    "First, let's just get the {object} ready together. I'll show you, then you can try.",
];
const VALIDATION: &[&str] = &[
    "It sounds like this feels like a lot right now. That's okay, I'm right here with you.",
    "You seem a bit worried. I understand, and we can go slowly.",
];

fn object_for(adl: AdlKind) -> &'static str {
    match adl {
        AdlKind::TakingMedicines => "pills",
        AdlKind::BrushingTeeth => "toothbrush",
        AdlKind::EatingMeals => "plate",
        AdlKind::GettingOutOfBed => "blanket",
        AdlKind::Toileting => "bathroom",
        AdlKind::WalkingExercise => "shoes",
        AdlKind::Dressing => "shirt",
        AdlKind::BathingShowering => "towel",
        AdlKind::Other => "things",
    }
}

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    hasher.finalize().into()
}

fn pick<'a>(options: &[&'a str], hash: &[u8; 32], slot: usize) -> &'a str {
    options[hash[slot] as usize % options.len()]
}

/// Deterministic text satisfying the same format contracts as a live model.
///
/// Patient turns are 1-3 sentences ending in one parenthetical cue; late-stage
/// turns stay sparse. Suggestions are four canonical `NAME: text` lines.
pub fn mock_generate(req: &ChatRequest) -> String {
    let kind = match req.request_kind {
        RequestKind::PatientTurn => "patient_turn",
        RequestKind::Suggestions => "suggestions",
    };
    let (hash, stage, adl) = match &req.mock_seed {
        Some(seed) => {
            let scenario = serde_json::to_vec(&seed.scenario).expect("scenario serializes");
            let hash = digest(&[&scenario, kind.as_bytes(), &seed.turn_index.to_le_bytes()]);
            (hash, seed.scenario.stage, seed.scenario.adl.kind())
        }
        None => {
            let messages = serde_json::to_vec(&req.bundle).expect("bundle serializes");
            (digest(&[&messages, kind.as_bytes()]), DementiaStage::Middle, AdlKind::Other)
        }
    };
    let object = object_for(adl);

    match req.request_kind {
        RequestKind::PatientTurn => {
            let options = match stage {
                DementiaStage::Early => EARLY,
                DementiaStage::Middle => MIDDLE,
                DementiaStage::Late => LATE,
            };
            pick(options, &hash, 0).replace("{object}", object)
        }
        RequestKind::Suggestions => [
            ("RECOGNITION", RECOGNITION),
            ("NEGOTIATION", NEGOTIATION),
            ("FACILITATION", FACILITATION),
            ("VALIDATION", VALIDATION),
        ]
        .iter()
        .enumerate()
        .map(|(i, (label, options))| format!("{label}: {}", pick(options, &hash, i + 1).replace("{object}", object)))
        .collect::<Vec<_>>()
        .join("\n"),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

#[async_trait]
impl ChatBackend for MockBackend {
    async fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        Ok(ChatResponse {
            text: mock_generate(req),
            latency_ms: 0,
            backend: BackendKind::Mock,
            attempt_count: 1,
        })
    }
}

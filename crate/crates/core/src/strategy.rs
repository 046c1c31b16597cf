//! The four person-centered caregiver communication strategies and the
//! line-oriented `NAME: suggestion` contract for model-generated options.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Recognition,
    Negotiation,
    Facilitation,
    Validation,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Self::Recognition, Self::Negotiation, Self::Facilitation, Self::Validation];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Recognition => "recognition",
            Self::Negotiation => "negotiation",
            Self::Facilitation => "facilitation",
            Self::Validation => "validation",
        }
    }

    /// Upper-case label used in the model output contract.
    pub fn label(self) -> &'static str {
        match self {
            Self::Recognition => "RECOGNITION",
            Self::Negotiation => "NEGOTIATION",
            Self::Facilitation => "FACILITATION",
            Self::Validation => "VALIDATION",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        Self::ALL.into_iter().find(|v| v.as_str().eq_ignore_ascii_case(s))
    }

    /// Primary function the strategy foregrounds.
    pub fn focus(self) -> &'static str {
        match self {
            Self::Recognition => "personhood and identity",
            Self::Negotiation => "choice and agency",
            Self::Facilitation => "supported participation",
            Self::Validation => "emotion-level attunement",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            Self::Recognition => {
                "Treat the person as a unique individual rather than a set of care tasks: use their preferred name or title, give an individualized greeting, affirm or rephrase what they said to show attentive engagement, and when appropriate reference enduring preferences, roles, or biographical details."
            }
            Self::Negotiation => {
                "Consult the person's preferences and build them into the care plan: offer bounded choices, ask for permission, check readiness, adjust the plan in response to refusals, and refer back to preferences they expressed earlier."
            }
            Self::Facilitation => {
                "Scaffold the task so the person can still take part: break the ADL into manageable steps, give prompts or model the action, pace the activity, arrange the environment (for example placing items within reach), and offer supportive affirmations. This includes intention-to-fulfill statements that acknowledge a request and promise it will be addressed after the current task."
            }
            Self::Validation => {
                "Acknowledge and legitimize the person's emotional state, especially when what they say is ambiguous, repetitive, or out of step with reality: name or mirror the emotion, convey understanding, and put relational comfort ahead of factual correction."
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exactly one non-empty caregiver option per strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Strategy, String>", into = "BTreeMap<Strategy, String>")]
pub struct StrategySuggestionSet {
    options: BTreeMap<Strategy, String>,
}

impl StrategySuggestionSet {
    pub fn new(options: BTreeMap<Strategy, String>) -> Result<Self, SuggestionParseError> {
        for s in Strategy::ALL {
            match options.get(&s) {
                None => return Err(SuggestionParseError::MissingStrategy(s)),
                Some(t) if t.trim().is_empty() => return Err(SuggestionParseError::EmptyOption(s)),
                Some(_) => {}
            }
        }
        let options = options.into_iter().map(|(k, v)| (k, v.trim().to_owned())).collect();
        Ok(Self { options })
    }

    pub fn get(&self, strategy: Strategy) -> &str {
        &self.options[&strategy]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Strategy, &str)> {
        self.options.iter().map(|(k, v)| (*k, v.as_str()))
    }

    /// Canonical rendering: one `LABEL: text` line per strategy.
    pub fn render(&self) -> String {
        render_lines(self.iter())
    }
}

pub(crate) fn render_lines<'a>(lines: impl Iterator<Item = (Strategy, &'a str)>) -> String {
    lines.map(|(s, t)| format!("{}: {}", s.label(), t)).collect::<Vec<_>>().join("\n")
}

impl TryFrom<BTreeMap<Strategy, String>> for StrategySuggestionSet {
    type Error = SuggestionParseError;

    fn try_from(options: BTreeMap<Strategy, String>) -> Result<Self, Self::Error> {
        Self::new(options)
    }
}

impl From<StrategySuggestionSet> for BTreeMap<Strategy, String> {
    fn from(set: StrategySuggestionSet) -> Self {
        set.options
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuggestionParseError {
    #[error("no option for strategy `{0}`")]
    MissingStrategy(Strategy),
    #[error("more than one option for strategy `{0}`")]
    DuplicateStrategy(Strategy),
    #[error("empty option for strategy `{0}`")]
    EmptyOption(Strategy),
}

/// Strips list markers and emphasis a model may wrap around a label line.
fn strip_decoration(line: &str) -> &str {
    line.trim()
        .trim_start_matches(|c: char| matches!(c, '-' | '*' | '•' | '#' | '>') || c.is_whitespace())
        .trim_start_matches(|c: char| c.is_ascii_digit())
        .trim_start_matches(|c: char| matches!(c, '.' | ')') || c.is_whitespace())
}

fn split_label(line: &str) -> Option<(Strategy, &str)> {
    let line = strip_decoration(line);
    let (head, tail) = line.split_once(':')?;
    let strategy = Strategy::parse(head.trim_matches(|c: char| c == '*' || c.is_whitespace()))?;
    Some((strategy, tail.trim_start_matches('*').trim()))
}

/// Parses model output containing one `NAME: suggestion` line per strategy.
///
/// Labels are matched case-insensitively in any order; lines without a
/// recognized label are ignored.
pub fn parse_suggestions(raw: &str) -> Result<StrategySuggestionSet, SuggestionParseError> {
    let mut options = BTreeMap::new();
    for (strategy, text) in raw.lines().filter_map(split_label) {
        if text.is_empty() {
            return Err(SuggestionParseError::EmptyOption(strategy));
        }
        if options.insert(strategy, text.to_owned()).is_some() {
            return Err(SuggestionParseError::DuplicateStrategy(strategy));
        }
    }
    StrategySuggestionSet::new(options)
}

//! Patient utterances: splitting generated text into verbal content and
//! parenthetical nonverbal cues, plus the sentence/word counters used to
//! check formatting constraints.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientUtterance {
    pub raw: String,
    pub verbal: String,
    pub cues: Vec<String>,
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte offset of the `)` matching the `(` at `open`, honoring nesting.
fn matching_close(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits generated patient text into verbal content and nonverbal cues.
///
/// Every balanced parenthesized segment becomes a cue (outer parentheses
/// stripped, inner text trimmed, empty cues dropped). An opening parenthesis
/// with no match, and any stray closing parenthesis, stay in the verbal text.
pub fn parse_patient_text(raw: &str) -> PatientUtterance {
    let mut verbal = String::with_capacity(raw.len());
    let mut cues = Vec::new();
    let mut rest = 0usize;

    while let Some(rel) = raw[rest..].find('(') {
        let open = rest + rel;
        match matching_close(raw, open) {
            Some(close) => {
                verbal.push_str(&raw[rest..open]);
                verbal.push(' ');
                let cue = normalize_whitespace(&raw[open + 1..close]);
                if !cue.is_empty() {
                    cues.push(cue);
                }
                rest = close + 1;
            }
            None => break,
        }
    }
    verbal.push_str(&raw[rest..]);

    PatientUtterance { raw: raw.to_owned(), verbal: normalize_whitespace(&verbal), cues }
}

fn strip_parentheticals(text: &str) -> String {
    parse_patient_text(text).verbal
}

/// Sentence count by terminal punctuation (`.`, `!`, `?`). A run of
/// terminators counts once, trailing text without a terminator counts as a
/// sentence, and parenthetical cues are ignored.
pub fn sentence_count(text: &str) -> usize {
    let verbal = strip_parentheticals(text);
    let mut count = 0;
    let mut pending = false;
    let mut in_terminator = false;
    for c in verbal.chars() {
        if matches!(c, '.' | '!' | '?') {
            if !in_terminator && pending {
                count += 1;
                pending = false;
            }
            in_terminator = true;
        } else {
            in_terminator = false;
            if c.is_alphanumeric() {
                pending = true;
            }
        }
    }
    count + usize::from(pending)
}

/// Number of whitespace-separated words in the verbal (non-cue) content.
pub fn verbal_word_count(text: &str) -> usize {
    strip_parentheticals(text)
        .split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

//! Evaluation metrics over a log snapshot: realism by ADL × stage, the
//! turn-by-turn rating curve, caregiver strategy usage, and failure-mode
//! frequencies.
//!
//! Means are kept at full precision in the structs and rounded to two
//! decimals when serialized; percentages are rounded to one decimal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize, Serializer};

use crate::scenario::{Adl, DementiaStage};
use crate::session::{CaregiverMode, SessionId};
use crate::store::{LogSnapshot, SessionRecord, TurnRecord};
use crate::strategy::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    StageMismatch,
    TaskGroundingError,
    CareSettingMismatch,
    Overcompliance,
    LanguageUnnaturalness,
    NeedsMorePrompting,
}

impl FailureMode {
    pub const ALL: [FailureMode; 6] = [
        Self::StageMismatch,
        Self::TaskGroundingError,
        Self::CareSettingMismatch,
        Self::Overcompliance,
        Self::LanguageUnnaturalness,
        Self::NeedsMorePrompting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::StageMismatch => "stage_mismatch",
            Self::TaskGroundingError => "task_grounding_error",
            Self::CareSettingMismatch => "care_setting_mismatch",
            Self::Overcompliance => "overcompliance",
            Self::LanguageUnnaturalness => "language_unnaturalness",
            Self::NeedsMorePrompting => "needs_more_prompting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s.trim())
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::StageMismatch => "response does not match the selected dementia stage",
            Self::TaskGroundingError => "implausible ADL steps, sequencing, setup, or multi-step planning",
            Self::CareSettingMismatch => "behavior contradicts the selected care environment",
            Self::Overcompliance => "too agreeable; should show more refusal, anxiety, or resistance",
            Self::LanguageUnnaturalness => "phrasing too well-formed, long, or complex for the stage",
            Self::NeedsMorePrompting => "progress should require repeated prompting or more assistance",
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn ser_round2<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*x))
}

fn ser_round2_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round2(*v)),
        None => s.serialize_none(),
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn rating(turn: &TurnRecord) -> Option<f64> {
    turn.rating.as_ref().map(|r| f64::from(r.score))
}

type SimKey = (SessionId, u32);

fn sim_key(turn: &TurnRecord) -> SimKey {
    (turn.session_id.clone(), turn.simulation_index)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStat {
    pub adl: Adl,
    pub stage: DementiaStage,
    #[serde(serialize_with = "ser_round2")]
    pub mean_rating: f64,
    /// Distinct simulations with at least one rated turn in this cell.
    pub occurrence_count: usize,
    pub rated_turns: usize,
}

/// Mean turn-level realism for each ADL × stage combination that has ratings.
/// Turns whose simulation has no session record are skipped.
pub fn realism_by_cell(turns: &[TurnRecord], sessions: &[SessionRecord]) -> Vec<CellStat> {
    let scenarios: HashMap<SimKey, (&Adl, DementiaStage)> = sessions
        .iter()
        .flat_map(|s| {
            s.simulations
                .iter()
                .map(move |sim| ((s.session_id.clone(), sim.simulation_index), (&sim.scenario.adl, sim.scenario.stage)))
        })
        .collect();

    let mut cells: BTreeMap<(Adl, DementiaStage), (Vec<f64>, BTreeSet<SimKey>)> = BTreeMap::new();
    for turn in turns {
        let (Some(score), Some((adl, stage))) = (rating(turn), scenarios.get(&sim_key(turn))) else {
            continue;
        };
        let cell = cells.entry(((*adl).clone(), *stage)).or_default();
        cell.0.push(score);
        cell.1.insert(sim_key(turn));
    }

    cells
        .into_iter()
        .map(|((adl, stage), (scores, sims))| CellStat {
            adl,
            stage,
            mean_rating: mean(scores.iter().copied()).expect("cells hold at least one rating"),
            occurrence_count: sims.len(),
            rated_turns: scores.len(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnPoint {
    pub turn_index: u32,
    #[serde(serialize_with = "ser_round2")]
    pub mean: f64,
    pub n_sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnCurve {
    pub per_turn_mean: Vec<TurnPoint>,
    /// Median number of rated turns per simulation; `None` for an empty log.
    pub median_session_length: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}

/// Mean rating at each turn index over the simulations that reached it, and
/// the median simulation length (rated turns per simulation).
pub fn turn_curve(turns: &[TurnRecord]) -> TurnCurve {
    let mut by_turn: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut lengths: HashMap<SimKey, usize> = HashMap::new();
    for turn in turns {
        if let Some(score) = rating(turn) {
            by_turn.entry(turn.turn_index).or_default().push(score);
            *lengths.entry(sim_key(turn)).or_default() += 1;
        }
    }
    let lengths: Vec<f64> = lengths.into_values().map(|n| n as f64).collect();
    TurnCurve {
        per_turn_mean: by_turn
            .into_iter()
            .map(|(turn_index, scores)| TurnPoint {
                turn_index,
                mean: mean(scores.iter().copied()).expect("non-empty"),
                n_sessions: scores.len(),
            })
            .collect(),
        median_session_length: median(&lengths),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageCategory {
    Recognition,
    Negotiation,
    Facilitation,
    Validation,
    Custom,
}

impl UsageCategory {
    pub const ALL: [UsageCategory; 5] =
        [Self::Recognition, Self::Negotiation, Self::Facilitation, Self::Validation, Self::Custom];

    fn from_strategy(s: Strategy) -> Self {
        match s {
            Strategy::Recognition => Self::Recognition,
            Strategy::Negotiation => Self::Negotiation,
            Strategy::Facilitation => Self::Facilitation,
            Strategy::Validation => Self::Validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyUsage {
    pub counts: BTreeMap<UsageCategory, usize>,
    pub total_turns: usize,
    pub percentages: BTreeMap<UsageCategory, f64>,
}

impl StrategyUsage {
    pub fn count(&self, c: UsageCategory) -> usize {
        self.counts[&c]
    }

    pub fn percentage(&self, c: UsageCategory) -> f64 {
        self.percentages[&c]
    }
}

/// Free text and edited selections count as `Custom`; unedited selections
/// count toward their strategy.
pub fn strategy_usage(turns: &[TurnRecord]) -> StrategyUsage {
    let mut counts: BTreeMap<UsageCategory, usize> = UsageCategory::ALL.iter().map(|c| (*c, 0)).collect();
    let mut total = 0;
    for action in turns.iter().filter_map(|t| t.caregiver.as_ref()) {
        let category = match (action.mode(), action.selected_strategy()) {
            (CaregiverMode::Selected, Some(s)) if !action.edited() => UsageCategory::from_strategy(s),
            _ => UsageCategory::Custom,
        };
        *counts.get_mut(&category).expect("all categories present") += 1;
        total += 1;
    }
    let percentages = counts
        .iter()
        .map(|(c, n)| (*c, if total == 0 { 0.0 } else { round1(100.0 * *n as f64 / total as f64) }))
        .collect();
    StrategyUsage { counts, total_turns: total, percentages }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureModeStat {
    pub code: FailureMode,
    pub commented_turn_count: usize,
    pub pct_of_commented: f64,
    /// Mean over the rated turns carrying this code.
    #[serde(serialize_with = "ser_round2_opt")]
    pub mean_rating: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FailureModeReport {
    /// Turns carrying at least one code.
    pub commented_turns: usize,
    pub per_code: Vec<FailureModeStat>,
}

impl FailureModeReport {
    pub fn get(&self, code: FailureMode) -> Option<&FailureModeStat> {
        self.per_code.iter().find(|s| s.code == code)
    }
}

/// Frequencies over annotated turns. A turn counts toward every code it
/// carries, so percentages can sum past 100.
pub fn failure_mode_stats(turns: &[TurnRecord]) -> FailureModeReport {
    let coded: Vec<(&TurnRecord, BTreeSet<FailureMode>)> = turns
        .iter()
        .filter_map(|t| {
            let codes: BTreeSet<FailureMode> = t.failure_codes.iter().flatten().copied().collect();
            (!codes.is_empty()).then_some((t, codes))
        })
        .collect();
    let denominator = coded.len();

    let per_code = FailureMode::ALL
        .iter()
        .filter_map(|code| {
            let carrying: Vec<&TurnRecord> = coded.iter().filter(|(_, c)| c.contains(code)).map(|(t, _)| *t).collect();
            (!carrying.is_empty()).then(|| FailureModeStat {
                code: *code,
                commented_turn_count: carrying.len(),
                pct_of_commented: round1(100.0 * carrying.len() as f64 / denominator as f64),
                mean_rating: mean(carrying.iter().filter_map(|t| rating(t))),
            })
        })
        .collect();
    FailureModeReport { commented_turns: denominator, per_code }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub sessions: usize,
    pub simulations: usize,
    pub patient_turns: usize,
    pub rated_turns: usize,
    pub critiqued_turns: usize,
    #[serde(serialize_with = "ser_round2_opt")]
    pub mean_rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub totals: Totals,
    pub realism_by_cell: Vec<CellStat>,
    pub turn_curve: TurnCurve,
    pub strategy_usage: StrategyUsage,
    pub failure_modes: FailureModeReport,
}

pub fn build_report(snapshot: &LogSnapshot) -> AnalysisReport {
    let turns = &snapshot.turns;
    let simulations: BTreeSet<SimKey> = turns.iter().map(sim_key).collect();
    AnalysisReport {
        totals: Totals {
            sessions: snapshot.sessions.len(),
            simulations: simulations.len(),
            patient_turns: turns.len(),
            rated_turns: turns.iter().filter(|t| t.rating.is_some()).count(),
            critiqued_turns: turns
                .iter()
                .filter(|t| t.rating.as_ref().is_some_and(|r| r.critique.is_some()))
                .count(),
            mean_rating: mean(turns.iter().filter_map(rating)),
        },
        realism_by_cell: realism_by_cell(turns, &snapshot.sessions),
        turn_curve: turn_curve(turns),
        strategy_usage: strategy_usage(turns),
        failure_modes: failure_mode_stats(turns),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.2}"))
}

/// Plain-text rendering of a report.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let t = &report.totals;
    let _ = writeln!(
        out,
        "Sessions: {}  Simulations: {}  Patient turns: {}  Rated: {}  With critique: {}  Mean realism: {}",
        t.sessions,
        t.simulations,
        t.patient_turns,
        t.rated_turns,
        t.critiqued_turns,
        fmt_opt(t.mean_rating)
    );

    out.push_str("\nRealism by ADL x stage\n");
    for c in &report.realism_by_cell {
        let _ = writeln!(
            out,
            "  {:<28} {:<7} mean {:.2}  occurrences {}",
            c.adl.export_token(),
            c.stage.as_str(),
            c.mean_rating,
            c.occurrence_count
        );
    }

    out.push_str("\nRating by turn\n");
    for p in &report.turn_curve.per_turn_mean {
        let _ = writeln!(out, "  T{:<3} mean {:.2}  sessions {}", p.turn_index, p.mean, p.n_sessions);
    }
    let _ = writeln!(out, "  median session length: {}", fmt_opt(report.turn_curve.median_session_length));

    let u = &report.strategy_usage;
    let _ = writeln!(out, "\nCaregiver strategy usage ({} turns)", u.total_turns);
    for c in UsageCategory::ALL {
        let _ = writeln!(out, "  {:<13} {:>4}  {:>5.1}%", format!("{c:?}"), u.count(c), u.percentage(c));
    }

    let f = &report.failure_modes;
    let _ = writeln!(out, "\nFailure modes ({} annotated turns)", f.commented_turns);
    for s in &f.per_code {
        let _ = writeln!(
            out,
            "  {:<24} {:>3} ({:.1}%)  mean rating {}",
            s.code.as_str(),
            s.commented_turn_count,
            s.pct_of_commented,
            fmt_opt(s.mean_rating)
        );
    }
    out
}

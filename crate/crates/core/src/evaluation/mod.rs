//! Scores simulated meetings against the committee's actual decisions.
//!
//! Alignment compares vote directions per member; accuracy compares the
//! decided rate. Counts are kept as exact integers and basis points, and
//! only converted to fractions or percentage points for display.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::MeetingOutcome;
use crate::engine::MAX_MOVE_BP;
use crate::persona::VoteDirection;
use crate::transcript::TranscriptFile;
use crate::units::{percent, MeetingDate, PolicyRate};

pub use report::{build_report, AgentAlignment, DetailRow, EvaluationReport, MeetingRow, PublishedMismatch};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("ground truth: {0}")]
    Parse(String),
    #[error("ground truth for {date}: {problem}")]
    Invalid { date: MeetingDate, problem: String },
    #[error("meeting {0} appears more than once")]
    DuplicateMeeting(MeetingDate),
    #[error("simulation for {sim} paired with ground truth for {truth}")]
    DateMismatch { sim: MeetingDate, truth: MeetingDate },
    #[error("no simulated meeting has a ground-truth record")]
    EmptyPairing,
    #[error("{0} did not vote in any paired meeting; alignment rate is undefined")]
    UndefinedAlignment(String),
    #[error("meeting {date}: decided {decided} but the rate moved {prev} -> {new}")]
    InconsistentDecision { date: MeetingDate, decided: VoteDirection, prev: PolicyRate, new: PolicyRate },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberVote {
    pub agent: String,
    pub direction: VoteDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    pub date: MeetingDate,
    #[serde(with = "percent")]
    pub prev_rate: PolicyRate,
    #[serde(with = "percent")]
    pub new_rate: PolicyRate,
    pub votes: Vec<MemberVote>,
}

impl GroundTruthRecord {
    fn validate(&self) -> Result<(), EvalError> {
        let invalid = |problem: String| EvalError::Invalid { date: self.date, problem };
        if self.new_rate.diff_bp(self.prev_rate).unsigned_abs() > u64::from(MAX_MOVE_BP) {
            return Err(invalid(format!("move {} -> {} exceeds 0.50 points", self.prev_rate, self.new_rate)));
        }
        if self.votes.is_empty() {
            return Err(invalid("no member votes".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.votes {
            if !seen.insert(v.agent.as_str()) {
                return Err(invalid(format!("{} votes twice", v.agent)));
            }
        }
        Ok(())
    }

    pub fn vote(&self, agent: &str) -> Option<VoteDirection> {
        self.votes.iter().find(|v| v.agent == agent).map(|v| v.direction)
    }
}

/// The ground-truth file: meetings in order plus, optionally, alignment
/// rates as previously published (in percent) to cross-check against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub schema_version: u32,
    #[serde(rename = "meeting")]
    pub meetings: Vec<GroundTruthRecord>,
    #[serde(default)]
    pub published_alignment: BTreeMap<String, f64>,
}

impl GroundTruth {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        let truth: GroundTruth = toml::from_str(text).map_err(|e| EvalError::Parse(e.to_string()))?;
        if truth.schema_version != 1 {
            return Err(EvalError::Parse(format!("unsupported schema_version {}", truth.schema_version)));
        }
        let mut dates = BTreeSet::new();
        for m in &truth.meetings {
            m.validate()?;
            if !dates.insert(m.date) {
                return Err(EvalError::DuplicateMeeting(m.date));
            }
        }
        Ok(truth)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text =
            fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }
}

/// The evaluation's view of one simulated meeting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub date: MeetingDate,
    pub prev_rate: PolicyRate,
    pub new_rate: PolicyRate,
    /// Direction of the alternative each voter chose.
    pub votes: Vec<MemberVote>,
    /// First-round stance per voter, when known.
    #[serde(default)]
    pub initial: Vec<MemberVote>,
}

impl SimulationRecord {
    pub fn from_outcome(outcome: &MeetingOutcome) -> Result<Self, EvalError> {
        let directions = outcome.vote_directions();
        let votes = outcome
            .final_votes
            .iter()
            .map(|v| MemberVote { agent: v.agent_name.clone(), direction: directions[&v.agent_name] })
            .collect();
        let initial = outcome
            .voters
            .iter()
            .filter_map(|name| {
                outcome.first_round_directions.get(name).map(|&d| MemberVote { agent: name.clone(), direction: d })
            })
            .collect();
        let record = Self {
            date: outcome.meeting_date,
            prev_rate: outcome.current_rate,
            new_rate: outcome.decided_rate,
            votes,
            initial,
        };
        let moved = VoteDirection::between(record.prev_rate, record.new_rate);
        if moved != outcome.decided.direction {
            return Err(EvalError::InconsistentDecision {
                date: record.date,
                decided: outcome.decided.direction,
                prev: record.prev_rate,
                new: record.new_rate,
            });
        }
        Ok(record)
    }

    /// Records for every completed transcript, plus the dates of those
    /// that hold a failure and so cannot be scored.
    pub fn from_transcripts<'a>(
        files: impl IntoIterator<Item = &'a TranscriptFile>,
    ) -> Result<(Vec<Self>, Vec<MeetingDate>), EvalError> {
        let mut records = Vec::new();
        let mut failed = Vec::new();
        for f in files {
            match &f.outcome {
                Some(o) => records.push(Self::from_outcome(o)?),
                None => failed.push(f.meeting_date),
            }
        }
        Ok((records, failed))
    }

    pub fn vote(&self, agent: &str) -> Option<VoteDirection> {
        self.votes.iter().find(|v| v.agent == agent).map(|v| v.direction)
    }

    pub fn initial(&self, agent: &str) -> Option<VoteDirection> {
        self.initial.iter().find(|v| v.agent == agent).map(|v| v.direction)
    }
}

/// An exact fraction `hits / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub hits: u32,
    pub total: u32,
}

impl Ratio {
    pub fn value(self) -> f64 {
        f64::from(self.hits) / f64::from(self.total)
    }

    /// Percentage rounded to one decimal: "85.7%", "50.0%".
    pub fn percent(self) -> String {
        format!("{:.1}%", self.value() * 100.0)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({})", self.hits, self.total, self.percent())
    }
}

/// Mean of squared gaps, held as a basis-point sum so it stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mse {
    pub sum_sq_bp: u64,
    pub meetings: u32,
}

impl Mse {
    /// In squared percentage points.
    pub fn value(self) -> f64 {
        self.sum_sq_bp as f64 / (f64::from(self.meetings) * 10_000.0)
    }

    /// Four decimals, as in "0.0156".
    pub fn display(self) -> String {
        format!("{:.4}", self.value())
    }
}

/// 1 when the simulated and real votes point the same way.
pub fn alignment_indicator(sim: VoteDirection, real: VoteDirection) -> u8 {
    u8::from(sim == real)
}

type Pairs<'a> = Vec<(&'a SimulationRecord, &'a GroundTruthRecord)>;

/// Matches simulations to ground truth by date. Returns the pairs, in
/// simulation order, and the dates of simulations without a record.
pub fn pair<'a>(
    sims: &'a [SimulationRecord],
    truths: &'a [GroundTruthRecord],
) -> Result<(Pairs<'a>, Vec<MeetingDate>), EvalError> {
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for s in sims {
        if !seen.insert(s.date) {
            return Err(EvalError::DuplicateMeeting(s.date));
        }
        match truths.iter().find(|t| t.date == s.date) {
            Some(t) => pairs.push((s, t)),
            None => unpaired.push(s.date),
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairing);
    }
    Ok((pairs, unpaired))
}

/// Share of paired meetings where `agent`'s simulated vote direction
/// matches the real one. Only meetings where the agent voted in both count.
pub fn alignment_rate(
    agent: &str,
    sims: &[SimulationRecord],
    truths: &[GroundTruthRecord],
) -> Result<Ratio, EvalError> {
    let (pairs, _) = pair(sims, truths)?;
    let mut ratio = Ratio { hits: 0, total: 0 };
    for (s, t) in pairs {
        if let (Some(sim), Some(real)) = (s.vote(agent), t.vote(agent)) {
            ratio.total += 1;
            ratio.hits += u32::from(alignment_indicator(sim, real));
        }
    }
    if ratio.total == 0 {
        return Err(EvalError::UndefinedAlignment(agent.to_string()));
    }
    Ok(ratio)
}

/// Simulated minus real decided rate, in basis points.
pub fn rate_gap(sim: &SimulationRecord, truth: &GroundTruthRecord) -> Result<i64, EvalError> {
    if sim.date != truth.date {
        return Err(EvalError::DateMismatch { sim: sim.date, truth: truth.date });
    }
    Ok(sim.new_rate.diff_bp(truth.new_rate))
}

pub fn mse(sims: &[SimulationRecord], truths: &[GroundTruthRecord]) -> Result<Mse, EvalError> {
    let (pairs, _) = pair(sims, truths)?;
    let mut sum_sq_bp = 0u64;
    for (s, t) in &pairs {
        let gap = rate_gap(s, t)?.unsigned_abs();
        sum_sq_bp += gap * gap;
    }
    Ok(Mse { sum_sq_bp, meetings: pairs.len() as u32 })
}

/// Share of paired meetings whose simulated decision equals the real one.
pub fn agreement_rate(sims: &[SimulationRecord], truths: &[GroundTruthRecord]) -> Result<Ratio, EvalError> {
    let (pairs, _) = pair(sims, truths)?;
    let hits = pairs.iter().filter(|(s, t)| s.new_rate == t.new_rate).count() as u32;
    Ok(Ratio { hits, total: pairs.len() as u32 })
}

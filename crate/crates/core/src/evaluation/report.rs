//! Assembled metrics and their text rendering.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{alignment_rate, pair, rate_gap, EvalError, GroundTruth, Mse, Ratio, SimulationRecord};
use crate::persona::VoteDirection;
use crate::units::{format_gap_bp, MeetingDate, PolicyRate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAlignment {
    pub agent: String,
    pub alignment: Ratio,
    pub rate: f64,
    /// The rate previously published for this agent, in percent, if given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_percent: Option<f64>,
}

/// A published alignment rate that the vote records do not reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedMismatch {
    pub agent: String,
    pub published_percent: f64,
    pub recomputed: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingRow {
    pub date: MeetingDate,
    pub simulated: String,
    pub actual: String,
    pub gap_bp: i64,
    pub gap: String,
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetailRow {
    pub date: MeetingDate,
    pub agent: String,
    pub initial: Option<VoteDirection>,
    #[serde(rename = "final")]
    pub final_vote: Option<VoteDirection>,
    pub real: Option<VoteDirection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub agents: Vec<AgentAlignment>,
    pub meetings: Vec<MeetingRow>,
    pub details: Vec<DetailRow>,
    pub mse: Mse,
    /// Squared percentage points.
    pub mse_value: f64,
    pub agreement: Ratio,
    /// Simulated meetings without a ground-truth record, left out of every metric.
    pub unpaired: Vec<MeetingDate>,
    pub published_mismatches: Vec<PublishedMismatch>,
}

/// "1.25% → 1.5%"
fn transition(prev: PolicyRate, new: PolicyRate) -> String {
    format!("{} → {}", prev.table_percent(), new.table_percent())
}

pub fn build_report(sims: &[SimulationRecord], truth: &GroundTruth) -> Result<EvaluationReport, EvalError> {
    let truths = &truth.meetings;
    let (pairs, unpaired) = pair(sims, truths)?;
    for d in &unpaired {
        warn!("no ground truth for simulated meeting {d}; excluded");
    }

    // agents in order of first appearance in the ground truth
    let mut names: Vec<&str> = Vec::new();
    for (_, t) in &pairs {
        for v in &t.votes {
            if !names.contains(&v.agent.as_str()) {
                names.push(&v.agent);
            }
        }
    }
    let paired_sims: Vec<SimulationRecord> = pairs.iter().map(|(s, _)| (*s).clone()).collect();
    let mut agents = Vec::new();
    let mut published_mismatches = Vec::new();
    for name in names {
        let alignment = match alignment_rate(name, &paired_sims, truths) {
            Ok(r) => r,
            Err(EvalError::UndefinedAlignment(_)) => continue,
            Err(e) => return Err(e),
        };
        let published_percent = truth.published_alignment.get(name).copied();
        if let Some(p) = published_percent {
            let recomputed = (alignment.value() * 1000.0).round() / 10.0;
            if (recomputed - p).abs() > 0.05 {
                published_mismatches.push(PublishedMismatch {
                    agent: name.to_string(),
                    published_percent: p,
                    recomputed: alignment,
                });
            }
        }
        agents.push(AgentAlignment { agent: name.to_string(), alignment, rate: alignment.value(), published_percent });
    }

    let mut meetings = Vec::new();
    let mut details = Vec::new();
    let mut sum_sq_bp = 0u64;
    let mut hits = 0u32;
    for (s, t) in &pairs {
        let gap_bp = rate_gap(s, t)?;
        sum_sq_bp += gap_bp.unsigned_abs().pow(2);
        let identical = s.new_rate == t.new_rate;
        hits += u32::from(identical);
        meetings.push(MeetingRow {
            date: s.date,
            simulated: transition(s.prev_rate, s.new_rate),
            actual: transition(t.prev_rate, t.new_rate),
            gap_bp,
            gap: format_gap_bp(gap_bp),
            identical,
        });
        let mut members: Vec<&str> = t.votes.iter().map(|v| v.agent.as_str()).collect();
        for v in &s.votes {
            if !members.contains(&v.agent.as_str()) {
                members.push(&v.agent);
            }
        }
        for agent in members {
            details.push(DetailRow {
                date: s.date,
                agent: agent.to_string(),
                initial: s.initial(agent),
                final_vote: s.vote(agent),
                real: t.vote(agent),
            });
        }
    }
    let mse = Mse { sum_sq_bp, meetings: pairs.len() as u32 };
    Ok(EvaluationReport {
        agents,
        meetings,
        details,
        mse,
        mse_value: mse.value(),
        agreement: Ratio { hits, total: pairs.len() as u32 },
        unpaired,
        published_mismatches,
    })
}

fn arrow(d: Option<VoteDirection>) -> &'static str {
    d.map(VoteDirection::arrow).unwrap_or("-")
}

impl EvaluationReport {
    /// Plain-text tables: alignment by agent, decided rate by meeting, and
    /// per-member votes.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let w = self.agents.iter().map(|a| a.agent.chars().count()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "Agent alignment");
        let _ = writeln!(out, "{:<w$}  {:>7}  {:>8}  {:>6}", "Agent", "Aligned", "Meetings", "AR");
        for a in &self.agents {
            let _ = writeln!(
                out,
                "{:<w$}  {:>7}  {:>8}  {:>6}",
                a.agent,
                a.alignment.hits,
                a.alignment.total,
                a.alignment.percent()
            );
        }

        let _ = writeln!(out, "\nMeeting results");
        let _ = writeln!(out, "{:<10}  {:<16}  {:<16}  {:>6}", "Date", "Simulated", "Actual", "Gap");
        for m in &self.meetings {
            let _ = writeln!(
                out,
                "{:<10}  {:<16}  {:<16}  {:>6}",
                m.date.short_name(),
                m.simulated,
                m.actual,
                m.gap
            );
        }

        let dw = self.details.iter().map(|d| d.agent.chars().count()).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "\nVotes by meeting");
        let _ = writeln!(out, "{:<10}  {:<dw$}  {:^7}  {:^5}  {:^4}", "Date", "Agent", "Initial", "Final", "Real");
        for d in &self.details {
            let _ = writeln!(
                out,
                "{:<10}  {:<dw$}  {:^7}  {:^5}  {:^4}",
                d.date.short_name(),
                d.agent,
                arrow(d.initial),
                arrow(d.final_vote),
                arrow(d.real)
            );
        }

        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "MSE: {} (squared percentage points over {} meetings)",
            self.mse.display(),
            self.mse.meetings
        );
        let _ = writeln!(out, "Agreement: {}", self.agreement);
        for m in &self.published_mismatches {
            let _ = writeln!(
                out,
                "Note: published alignment for {} is {}%, but the vote records give {}.",
                m.agent, m.published_percent, m.recomputed
            );
        }
        for d in &self.unpaired {
            let _ = writeln!(out, "Note: {d} has no ground-truth record and was excluded.");
        }
        out
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("value serializes") + "\n"
    }
}

//! On-disk meeting transcripts.
//!
//! A transcript is one JSON object with an explicit `schema_version`. It is
//! written canonically (object keys sorted, two-space indent, trailing
//! newline), so two runs can be compared with `diff` or a byte comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::TokenUsage;
use crate::engine::{AltLabel, MeetingError, TieBreak, MeetingOutcome, SessionRecord};
use crate::events::{Stage, TranscriptEvent};
use crate::units::MeetingDate;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("transcript is not valid JSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported transcript schema_version {found} (expected {expected})")]
    UnknownVersion { found: u64, expected: u32 },
    #[error("transcript events are not ordered by turn_index (at event {0})")]
    Unordered(usize),
}

/// Why a meeting stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    /// `None` when the meeting failed during setup.
    pub stage: Option<Stage>,
    pub error: String,
    pub transcript: Vec<TranscriptEvent>,
    pub sessions: Vec<SessionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub schema_version: u32,
    pub meeting_date: MeetingDate,
    pub seed: u64,
    pub model: String,
    /// sha256 of every prompt template, keyed by template name.
    pub template_checksums: BTreeMap<String, String>,
    pub token_usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<MeetingOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl TranscriptFile {
    pub fn completed(outcome: MeetingOutcome, model: &str, template_checksums: BTreeMap<String, String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            meeting_date: outcome.meeting_date,
            seed: outcome.seed,
            model: model.to_string(),
            template_checksums,
            token_usage: outcome.token_usage,
            outcome: Some(outcome),
            failure: None,
        }
    }

    pub fn failed(
        error: &MeetingError,
        seed: u64,
        model: &str,
        template_checksums: BTreeMap<String, String>,
    ) -> Self {
        let mut token_usage = TokenUsage::default();
        for s in &error.sessions {
            token_usage += s.usage;
        }
        Self {
            schema_version: SCHEMA_VERSION,
            meeting_date: error.meeting_date,
            seed,
            model: model.to_string(),
            template_checksums,
            token_usage,
            outcome: None,
            failure: Some(Failure {
                stage: error.stage,
                error: error.to_string(),
                transcript: error.transcript.clone(),
                sessions: error.sessions.clone(),
            }),
        }
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        match (&self.outcome, &self.failure) {
            (Some(o), _) => &o.transcript,
            (None, Some(f)) => &f.transcript,
            (None, None) => &[],
        }
    }

    /// Canonical JSON text.
    pub fn to_canonical_json(&self) -> String {
        // serde_json::Value keeps object keys in a BTreeMap, so this sorts them.
        let value = serde_json::to_value(self).expect("transcript serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, TranscriptError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        let found = value.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0);
        if found != u64::from(SCHEMA_VERSION) {
            return Err(TranscriptError::UnknownVersion { found, expected: SCHEMA_VERSION });
        }
        let file: TranscriptFile = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        if let Some(i) = file.events().windows(2).position(|w| w[0].turn_index >= w[1].turn_index) {
            return Err(TranscriptError::Unordered(i + 1));
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<(), TranscriptError> {
        fs::write(path, self.to_canonical_json())
            .map_err(|source| TranscriptError::Io { path: path.display().to_string(), source })
    }

    pub fn read(path: &Path) -> Result<Self, TranscriptError> {
        let text = fs::read_to_string(path)
            .map_err(|source| TranscriptError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// File name used for this meeting, e.g. `2018-05.json`.
    pub fn file_name(&self) -> String {
        format!("{}.json", self.meeting_date)
    }
}

/// Human-readable rendering of a transcript: the dialogue grouped by
/// stage, then a tally section.
pub fn render_replay(file: &TranscriptFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Meeting {} (seed {}, model {})", file.meeting_date.long_name(), file.seed, file.model);
    let mut stage: Option<Stage> = None;
    // the tally event is covered by the closing section
    for e in file.events().iter().filter(|e| e.stage != Stage::Tally) {
        if stage != Some(e.stage) {
            stage = Some(e.stage);
            let _ = writeln!(out, "\n== {} ==", e.stage.title());
        }
        let mut tags = Vec::new();
        if let Some(d) = e.parsed_direction {
            tags.push(d.verb().to_string());
        }
        if e.retry {
            tags.push("rejected".to_string());
        }
        let tags = if tags.is_empty() { String::new() } else { format!(" [{}]", tags.join(", ")) };
        let _ = writeln!(out, "#{} {}{}:", e.turn_index, e.speaker, tags);
        for line in e.content.lines() {
            let _ = writeln!(out, "    {line}");
        }
    }
    let _ = writeln!(out, "\n== Tally ==");
    match (&file.outcome, &file.failure) {
        (Some(o), _) => {
            for label in AltLabel::ALL {
                let alt = o.alternatives.get(label);
                let count = o.tally.counts.get(&label).copied().unwrap_or(0);
                let _ = writeln!(out, "{label}: {count}  ({} {})", alt.direction.verb(), alt.target.fixed_percent());
            }
            for v in &o.final_votes {
                let _ = writeln!(out, "  {} voted {}", v.agent_name, v.choice);
            }
            if o.tie_break() != TieBreak::None {
                let _ = writeln!(out, "Tie broken by {:?}", o.tie_break());
            }
            let _ = writeln!(out, "{}", o.decision_line());
        }
        (None, Some(f)) => {
            let _ = writeln!(out, "No decision: {}", f.error);
        }
        (None, None) => {
            let _ = writeln!(out, "No decision recorded");
        }
    }
    let _ = writeln!(out, "Tokens: {}", file.token_usage.total());
    out
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn parse_error(text: &str, e: &serde_json::Error) -> TranscriptError {
    let offset = if e.line() == 0 {
        0
    } else {
        let line_start: usize = text.split_inclusive('\n').take(e.line() - 1).map(str::len).sum();
        (line_start + e.column().saturating_sub(1)).min(text.len())
    };
    TranscriptError::Parse { offset, message: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::engine::meeting_tests::{config, plan};
    use crate::engine::run_meeting;
    use crate::template::TemplateSet;

    fn sample() -> TranscriptFile {
        let templates = TemplateSet::builtin();
        let backend = ScriptedBackend::new(plan(["A", "B", "B", "C", "A"]).to_script());
        let outcome = run_meeting(&config(2), &backend, &templates).unwrap();
        TranscriptFile::completed(outcome, "scripted", templates.checksums())
    }

    #[test]
    fn canonical_round_trip() {
        let file = sample();
        let text = file.to_canonical_json();
        let back = TranscriptFile::from_json(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_canonical_json(), text);
        // keys sorted at the top level
        let keys: Vec<&str> = text.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let text = sample().to_canonical_json();
        let cut = &text[..text.len() / 2];
        match TranscriptFile::from_json(cut) {
            Err(TranscriptError::Parse { offset, .. }) => assert!(offset > 0 && offset <= cut.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
        match TranscriptFile::from_json("{\n  \"a\": tru") {
            Err(TranscriptError::Parse { offset, .. }) => assert!((8..=13).contains(&offset), "{offset}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replay_ends_with_tally() {
        let text = render_replay(&sample());
        let tally = text.split("== Tally ==").nth(1).unwrap();
        assert!(tally.contains("A: 2"), "{tally}");
        assert!(tally.contains("B: 2"));
        assert!(tally.contains("C: 1"));
        assert!(tally.contains("Tie broken by Chair"), "{tally}");
        assert!(text.contains("== Debate =="));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = sample().to_canonical_json().replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
        assert!(matches!(
            TranscriptFile::from_json(&text),
            Err(TranscriptError::UnknownVersion { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn failed_meeting_keeps_partial_log() {
        let templates = TemplateSet::builtin();
        let mut p = plan(["A"; 5]);
        p.voters[1].vote = "A or B".into();
        let backend = ScriptedBackend::new(p.to_script());
        let err = run_meeting(&config(2), &backend, &templates).unwrap_err();
        let file = TranscriptFile::failed(&err, 2, "scripted", templates.checksums());
        let back = TranscriptFile::from_json(&file.to_canonical_json()).unwrap();
        let failure = back.failure.unwrap();
        assert_eq!(failure.stage, Some(Stage::Vote));
        assert!(failure.error.contains("Voter 1"));
        assert!(back.token_usage.total() > 0);
        assert!(!failure.transcript.is_empty());
    }
}

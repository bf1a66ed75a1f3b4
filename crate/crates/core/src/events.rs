//! Audit trail of a meeting: one event per reply, in dialogue order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::persona::VoteDirection;

/// Speaker recorded for events the orchestrator emits itself (the tally).
pub const SYSTEM_SPEAKER: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cleanse,
    Materials,
    Probe,
    Alternatives,
    PrivateIdea,
    FirstRound,
    Debate,
    LegalReview,
    Vote,
    Tally,
}

impl Stage {
    pub fn title(self) -> &'static str {
        match self {
            Stage::Cleanse => "Memory cleanse",
            Stage::Materials => "Materials",
            Stage::Probe => "Comprehension probe",
            Stage::Alternatives => "Policy alternatives",
            Stage::PrivateIdea => "Private ideas",
            Stage::FirstRound => "First round",
            Stage::Debate => "Debate",
            Stage::LegalReview => "Legal review",
            Stage::Vote => "Vote",
            Stage::Tally => "Tally",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub stage: Stage,
    pub speaker: String,
    pub turn_index: u64,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parsed_direction: Option<VoteDirection>,
    /// Set on replies that were rejected (followed by a re-ask or an error).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub retry: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<TranscriptEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, stage: Stage, speaker: &str, content: impl Into<String>) -> &mut TranscriptEvent {
        let turn_index = self.events.len() as u64;
        self.events.push(TranscriptEvent {
            stage,
            speaker: speaker.to_string(),
            turn_index,
            content: content.into(),
            parsed_direction: None,
            retry: false,
        });
        self.events.last_mut().expect("just pushed")
    }

    /// Marks event `index` as a rejected reply.
    pub fn record_retry(&mut self, index: usize) {
        self.events[index].retry = true;
    }

    pub fn set_direction(&mut self, index: usize, direction: VoteDirection) {
        self.events[index].parsed_direction = Some(direction);
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<TranscriptEvent> {
        self.events
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.events.iter().filter(|e| e.stage == stage).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turn_indices_increase() {
        let mut log = EventLog::new();
        log.record(Stage::Cleanse, "a", "ok");
        log.record(Stage::Materials, "a", "Completed").retry = true;
        log.record(Stage::Tally, SYSTEM_SPEAKER, "A:1");
        let idx: Vec<_> = log.events().iter().map(|e| e.turn_index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(log.count(Stage::Materials), 1);
        assert!(log.events()[1].retry);
    }
}

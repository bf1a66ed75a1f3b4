//! The meeting protocol: alternatives, private ideas, first round, debate,
//! legal review, vote and tally.

mod meeting;
pub mod parse;
pub mod script;
mod policy;
pub mod schedule;
mod stages;
mod tally;

pub use meeting::{probe_agents, run_meeting, AgentProbe, MeetingConfig, MeetingError, MeetingOutcome, MeetingSettings, SessionRecord};
pub use policy::{AltLabel, Alternative, AlternativeSet, PrivateIdea, Vote, MAX_MOVE_BP};
pub use schedule::{make_debate_schedule, DebateSchedule};
pub use stages::{
    quote, stage1_alternatives, stage2_private_ideas, stage3_first_round, stage4_debate, stage5_legal_review,
    stage5_vote, DebateTurn, FirstRound, StageContext, StageError, CATCH_UP_HEADER, DIGEST_HEADER, LEGAL_HEADER,
    MEETING_DIGEST_HEADER,
};
pub use tally::{tally, TallyResult, TieBreak};

/// RNG stream for speaking orders.
pub const SCHEDULE_STREAM: u64 = 0;
/// RNG stream for probe district choice, kept apart so probes do not shift schedules.
pub const PROBE_STREAM: u64 = 1;

#[cfg(test)]
pub(crate) use meeting::tests as meeting_tests;

//! One full meeting: setup, the five stages and the tally.

// MeetingError carries the partial transcript by value.
#![allow(clippy::result_large_err)]

use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::{Alternative, AlternativeSet, PrivateIdea, Vote};
use super::schedule::make_debate_schedule;
use super::stages::{
    quote, stage1_alternatives, stage2_private_ideas, stage3_first_round, stage4_debate, stage5_legal_review,
    stage5_vote, StageContext, StageError,
};
use super::tally::{tally, TallyResult, TieBreak};
use super::{PROBE_STREAM, SCHEDULE_STREAM};
use crate::backend::{open_session, ChatBackend, ChatMessage, Session, TokenUsage};
use crate::events::{EventLog, Stage, TranscriptEvent, SYSTEM_SPEAKER};
use crate::materials::{
    cleanse_memory, comprehension_probe, feed_materials, DocKind, FeedOptions, MaterialDoc, ProbeOptions,
    ProbeResult, Stopwords,
};
use crate::persona::{render_character_prompt, Role, Roster, VoteDirection};
use crate::rng::MeetingRng;
use crate::template::TemplateSet;
use crate::units::{MeetingDate, PolicyRate};

/// Tunables shared by every meeting of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeetingSettings {
    pub turns_per_voter: usize,
    pub probe_enabled: bool,
    pub parse_retries: u32,
    pub max_chunk: usize,
    pub ack_retries: u32,
    pub probe: ProbeOptions,
    /// Abort the meeting when an agent fails the comprehension probe.
    pub strict_probe: bool,
    /// Reshuffle the debate order to avoid back-to-back turns.
    pub avoid_repeat_speakers: bool,
}

impl Default for MeetingSettings {
    fn default() -> Self {
        let feed = FeedOptions::default();
        Self {
            turns_per_voter: 3,
            probe_enabled: false,
            parse_retries: 2,
            max_chunk: feed.max_chunk,
            ack_retries: feed.ack_retries,
            probe: ProbeOptions::default(),
            strict_probe: false,
            avoid_repeat_speakers: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeetingConfig {
    pub meeting_date: MeetingDate,
    pub current_rate: PolicyRate,
    pub roster: Roster,
    pub materials: Vec<MaterialDoc>,
    pub seed: u64,
    pub settings: MeetingSettings,
    pub stopwords: Stopwords,
}

impl MeetingConfig {
    pub fn validate(&self) -> Result<(), StageError> {
        if self.settings.turns_per_voter == 0 {
            return Err(StageError::Config("turns_per_voter must be at least 1".into()));
        }
        if self.materials.is_empty() {
            return Err(StageError::Config("a meeting needs at least one material document".into()));
        }
        if self.settings.max_chunk == 0 {
            return Err(StageError::Config("max_chunk must be positive".into()));
        }
        if let Some(doc) = self.materials.iter().find(|d| d.meeting_date != self.meeting_date) {
            return Err(StageError::Config(format!(
                "{} is dated {} but the meeting is {}",
                doc.kind, doc.meeting_date, self.meeting_date
            )));
        }
        Ok(())
    }
}

/// A session's final state, kept for audits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub agent: String,
    pub role: Role,
    pub messages: Vec<ChatMessage>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingOutcome {
    pub meeting_date: MeetingDate,
    pub current_rate: PolicyRate,
    pub seed: u64,
    pub settings: MeetingSettings,
    pub voters: Vec<String>,
    pub alternatives: AlternativeSet,
    pub private_ideas: Vec<PrivateIdea>,
    pub first_round_order: Vec<String>,
    pub first_round_directions: BTreeMap<String, VoteDirection>,
    pub debate_schedule: Vec<String>,
    pub debate_has_adjacent_repeat: bool,
    /// Each voter's stance at their last debate turn.
    pub final_debate_directions: BTreeMap<String, VoteDirection>,
    pub legal_review: String,
    pub final_votes: Vec<Vote>,
    pub tally: TallyResult,
    pub decided: Alternative,
    pub decided_rate: PolicyRate,
    pub probes: Vec<ProbeResult>,
    pub transcript: Vec<TranscriptEvent>,
    pub sessions: Vec<SessionRecord>,
    pub token_usage: TokenUsage,
}

impl MeetingOutcome {
    pub fn tie_break(&self) -> TieBreak {
        self.tally.tie_break
    }

    /// Direction of the alternative each voter chose.
    pub fn vote_directions(&self) -> BTreeMap<String, VoteDirection> {
        self.final_votes
            .iter()
            .map(|v| (v.agent_name.clone(), self.alternatives.get(v.choice).direction))
            .collect()
    }

    /// "Decided: maintain at 1.50%"
    pub fn decision_line(&self) -> String {
        format!("Decided: {} at {}", self.decided.direction.verb(), self.decided_rate.fixed_percent())
    }
}

/// A failed meeting, with everything recorded up to the failure.
#[derive(Debug, Error)]
#[error("meeting {meeting_date} failed during {}: {source}", stage.map(|s| s.title()).unwrap_or("setup"))]
pub struct MeetingError {
    pub meeting_date: MeetingDate,
    /// `None` when the failure happened before any agent was addressed.
    pub stage: Option<Stage>,
    pub source: StageError,
    pub transcript: Vec<TranscriptEvent>,
    pub sessions: Vec<SessionRecord>,
}

struct Run<'a> {
    config: &'a MeetingConfig,
    ctx: StageContext<'a>,
    log: EventLog,
    /// Sessions in roster order.
    sessions: Vec<Session>,
    roles: Vec<Role>,
}

impl Run<'_> {
    fn fail(&self, stage: Option<Stage>, source: StageError) -> MeetingError {
        MeetingError {
            meeting_date: self.config.meeting_date,
            stage,
            source,
            transcript: self.log.events().to_vec(),
            sessions: self.records(),
        }
    }

    fn records(&self) -> Vec<SessionRecord> {
        self.sessions
            .iter()
            .zip(&self.roles)
            .map(|(s, &role)| SessionRecord {
                agent: s.agent_name().to_string(),
                role,
                messages: s.history().to_vec(),
                usage: s.usage(),
            })
            .collect()
    }

    fn index_of(&self, role: Role) -> usize {
        self.roles.iter().position(|&r| r == role).expect("roster validated")
    }
}

/// Runs setup and every stage in order. On failure the error carries the
/// partial transcript and session histories.
pub fn run_meeting(
    config: &MeetingConfig,
    backend: &dyn ChatBackend,
    templates: &TemplateSet,
) -> Result<MeetingOutcome, MeetingError> {
    let ctx = StageContext {
        backend,
        templates,
        meeting_date: config.meeting_date,
        current_rate: config.current_rate,
        parse_retries: config.settings.parse_retries,
    };
    let mut run = Run { config, ctx, log: EventLog::new(), sessions: Vec::new(), roles: Vec::new() };
    if let Err(e) = config.validate() {
        return Err(run.fail(None, e));
    }
    info!("meeting {}: opening {} sessions", config.meeting_date, config.roster.agents().len());
    for profile in config.roster.agents() {
        let opened = render_character_prompt(profile, config.meeting_date, config.current_rate, templates)
            .map_err(StageError::from)
            .and_then(|prompt| {
                open_session(&profile.name, &prompt)
                    .map_err(|source| StageError::Backend { agent: profile.name.clone(), source })
            });
        match opened {
            Ok(s) => {
                run.sessions.push(s);
                run.roles.push(profile.role);
            }
            Err(e) => return Err(run.fail(None, e)),
        }
    }
    let probes = setup_agents(&mut run)?;
    run_stages(run, probes)
}

/// Cleanse, materials and (optionally) the probe, one agent at a time.
fn setup_agents(run: &mut Run<'_>) -> Result<Vec<ProbeResult>, MeetingError> {
    let config = run.config;
    let feed = FeedOptions { max_chunk: config.settings.max_chunk, ack_retries: config.settings.ack_retries };
    let probe_doc = config.materials.iter().find(|d| d.kind == DocKind::BeigeBook).unwrap_or(&config.materials[0]);
    let mut probe_rng = MeetingRng::with_stream(config.seed, PROBE_STREAM);
    let mut probes = Vec::new();
    for i in 0..run.sessions.len() {
        let backend = run.ctx.backend;
        let templates = run.ctx.templates;
        let session = &mut run.sessions[i];
        let result = cleanse_memory(session, backend, config.meeting_date, templates, &mut run.log)
            .map_err(|e| (Stage::Cleanse, StageError::from(e)));
        if let Err((stage, e)) = result {
            return Err(run.fail(Some(stage), e));
        }
        for doc in &config.materials {
            if let Err(e) = feed_materials(&mut run.sessions[i], backend, doc, feed, templates, &mut run.log) {
                return Err(run.fail(Some(Stage::Materials), e.into()));
            }
        }
        if config.settings.probe_enabled {
            let probe = comprehension_probe(
                &mut run.sessions[i],
                backend,
                probe_doc,
                &mut probe_rng,
                config.settings.probe,
                &config.stopwords,
                templates,
                &mut run.log,
            );
            match probe {
                Ok(p) if !p.passed && config.settings.strict_probe => {
                    let e = StageError::ProbeFailed { agent: p.agent, district: p.district, score: p.score };
                    return Err(run.fail(Some(Stage::Probe), e));
                }
                Ok(p) => probes.push(p),
                Err(e) => return Err(run.fail(Some(Stage::Probe), e.into())),
            }
        }
    }
    Ok(probes)
}

/// Probe result for one agent, or why it could not be probed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProbe {
    pub agent: String,
    pub result: Result<ProbeResult, String>,
}

/// Briefs every agent (cleanse and materials) and runs the comprehension
/// probe on the Beige Book, drawing districts exactly as a meeting with
/// the same seed would. Errors are kept per agent; the rest still run.
pub fn probe_agents(config: &MeetingConfig, backend: &dyn ChatBackend, templates: &TemplateSet) -> Result<Vec<AgentProbe>, StageError> {
    config.validate()?;
    let feed = FeedOptions { max_chunk: config.settings.max_chunk, ack_retries: config.settings.ack_retries };
    let probe_doc = config.materials.iter().find(|d| d.kind == DocKind::BeigeBook).unwrap_or(&config.materials[0]);
    let mut rng = MeetingRng::with_stream(config.seed, PROBE_STREAM);
    let mut log = EventLog::new();
    let mut out = Vec::new();
    for profile in config.roster.agents() {
        let result = (|| -> Result<ProbeResult, String> {
            let prompt = render_character_prompt(profile, config.meeting_date, config.current_rate, templates)
                .map_err(|e| e.to_string())?;
            let mut session = open_session(&profile.name, &prompt).map_err(|e| e.to_string())?;
            cleanse_memory(&mut session, backend, config.meeting_date, templates, &mut log).map_err(|e| e.to_string())?;
            for doc in &config.materials {
                feed_materials(&mut session, backend, doc, feed, templates, &mut log).map_err(|e| e.to_string())?;
            }
            comprehension_probe(&mut session, backend, probe_doc, &mut rng, config.settings.probe, &config.stopwords, templates, &mut log)
                .map_err(|e| e.to_string())
        })();
        if let Err(e) = &result {
            warn!("{}: probe not completed: {e}", profile.name);
        }
        out.push(AgentProbe { agent: profile.name.clone(), result });
    }
    Ok(out)
}

fn run_stages(mut run: Run<'_>, probes: Vec<ProbeResult>) -> Result<MeetingOutcome, MeetingError> {
    let config = run.config;
    let ctx = run.ctx;
    let economist = run.index_of(Role::Economist);
    let legal = run.index_of(Role::LegalExpert);
    let voter_idx: Vec<usize> = (0..run.roles.len()).filter(|&i| run.roles[i].is_voting()).collect();

    // Voters are moved out so stages can take them as one slice; they are
    // put back (in roster order) before any return.
    let mut others: Vec<Option<Session>> = run.sessions.drain(..).map(Some).collect();
    let mut voters: Vec<Session> = voter_idx.iter().map(|&i| others[i].take().expect("distinct")).collect();
    let mut economist_s = others[economist].take().expect("economist");
    let mut legal_s = others[legal].take().expect("legal expert");

    let result = (|| -> Result<_, (Stage, StageError)> {
        let alternatives =
            stage1_alternatives(&ctx, &mut economist_s, &mut run.log).map_err(|e| (Stage::Alternatives, e))?;
        let ideas =
            stage2_private_ideas(&ctx, &mut voters, &mut run.log).map_err(|e| (Stage::PrivateIdea, e))?;
        let mut rng = MeetingRng::with_stream(config.seed, SCHEDULE_STREAM);
        let first =
            stage3_first_round(&ctx, &mut voters, &mut rng, &mut run.log).map_err(|e| (Stage::FirstRound, e))?;
        let schedule = make_debate_schedule(
            voters.len(),
            config.settings.turns_per_voter,
            config.settings.avoid_repeat_speakers,
            &mut rng,
        );
        if schedule.has_adjacent_repeat && config.settings.avoid_repeat_speakers {
            warn!("meeting {}: debate schedule has back-to-back turns", config.meeting_date);
        }
        let turns = stage4_debate(&ctx, &mut voters, &alternatives, &schedule, &mut run.log)
            .map_err(|e| (Stage::Debate, e))?;
        let names: Vec<String> = voters.iter().map(|s| s.agent_name().to_string()).collect();
        let mut discussion: Vec<String> = Vec::new();
        let events = run.log.events();
        for e in events.iter().filter(|e| !e.retry && matches!(e.stage, Stage::FirstRound | Stage::Debate)) {
            discussion.push(quote(e.stage, &e.speaker, &e.content));
        }
        let review =
            stage5_legal_review(&ctx, &mut legal_s, &mut voters, &alternatives, &discussion, &mut run.log)
                .map_err(|e| (Stage::LegalReview, e))?;
        let votes = stage5_vote(&ctx, &mut voters, &alternatives, &mut run.log).map_err(|e| (Stage::Vote, e))?;
        Ok((alternatives, ideas, first, schedule, turns, names, review, votes))
    })();

    // restore roster order
    for (slot, s) in voter_idx.iter().zip(voters) {
        others[*slot] = Some(s);
    }
    others[economist] = Some(economist_s);
    others[legal] = Some(legal_s);
    run.sessions = others.into_iter().map(|s| s.expect("all restored")).collect();

    let (alternatives, ideas, first, schedule, turns, names, legal_review, votes) = match result {
        Ok(v) => v,
        Err((stage, e)) => return Err(run.fail(Some(stage), e)),
    };

    let result = tally(&votes, &config.roster);
    let decided = alternatives.get(result.winner).clone();
    let counts = result.counts.iter().map(|(l, c)| format!("{l}: {c}")).collect::<Vec<_>>().join(", ");
    run.log.record(Stage::Tally, SYSTEM_SPEAKER, format!("{counts}. Decided: {}", decided.headline())).parsed_direction =
        Some(decided.direction);
    info!("meeting {}: decided {} ({counts})", config.meeting_date, decided.headline());

    let first_round_directions =
        first.directions.iter().enumerate().map(|(i, &d)| (names[i].clone(), d)).collect();
    let final_debate_directions = turns.iter().map(|t| (names[t.speaker].clone(), t.direction)).collect();
    let sessions = run.records();
    let mut token_usage = TokenUsage::default();
    for s in &sessions {
        token_usage += s.usage;
    }
    Ok(MeetingOutcome {
        meeting_date: config.meeting_date,
        current_rate: config.current_rate,
        seed: config.seed,
        settings: config.settings.clone(),
        voters: names.clone(),
        alternatives,
        private_ideas: ideas,
        first_round_order: first.order.iter().map(|&i| names[i].clone()).collect(),
        first_round_directions,
        debate_schedule: schedule.names(&names).into_iter().map(String::from).collect(),
        debate_has_adjacent_repeat: schedule.has_adjacent_repeat,
        final_debate_directions,
        legal_review,
        final_votes: votes,
        decided_rate: decided.target,
        decided,
        tally: result,
        probes,
        transcript: run.log.into_events(),
        sessions,
        token_usage,
    })
}

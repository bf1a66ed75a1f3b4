//! The five meeting stages, each driving already-initialized sessions.

use log::{info, warn};
use thiserror::Error;

use super::parse::{
    alternatives_instruction, check_review, parse_alternatives, parse_stance, parse_vote, reformat_request,
    ParseError, REVIEW_INSTRUCTION, STANCE_INSTRUCTION, VOTE_INSTRUCTION,
};
use super::policy::{AlternativeSet, PrivateIdea, Vote};
use super::schedule::{first_round_order, DebateSchedule};
use crate::backend::{BackendError, ChatBackend, Session};
use crate::events::{EventLog, Stage};
use crate::materials::MaterialsError;
use crate::persona::{PersonaError, VoteDirection};
use crate::rng::MeetingRng;
use crate::template::{TemplateError, TemplateKey, TemplateSet, Vars};
use crate::units::{MeetingDate, PolicyRate};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{agent}: {source}")]
    Backend { agent: String, source: BackendError },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Materials(#[from] MaterialsError),
    #[error("{agent}: unusable reply after {attempts} attempt(s): {source}")]
    Parse { agent: String, attempts: u32, source: ParseError },
    #[error("{agent} failed the comprehension probe on {district} (score {score:.2})")]
    ProbeFailed { agent: String, district: String, score: f64 },
    #[error("invalid meeting configuration: {0}")]
    Config(String),
}

/// What every stage needs besides the sessions it drives.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub backend: &'a dyn ChatBackend,
    pub templates: &'a TemplateSet,
    pub meeting_date: MeetingDate,
    pub current_rate: PolicyRate,
    /// Re-asks after a reply that does not parse.
    pub parse_retries: u32,
}

impl StageContext<'_> {
    fn render(&self, key: TemplateKey, vars: Vars) -> Result<String, TemplateError> {
        let vars = vars
            .with("meeting_date", self.meeting_date.long_name())
            .with("current_rate", self.current_rate.fixed_percent());
        self.templates.render(key, &vars)
    }
}

struct Answer<T> {
    value: T,
    reply: String,
    event: usize,
}

/// Sends `prompt` plus `instruction`, re-asking with a reformat request up
/// to `parse_retries` times. Every reply is logged; rejected ones carry the
/// retry flag.
fn ask<T>(
    ctx: &StageContext<'_>,
    session: &mut Session,
    log: &mut EventLog,
    stage: Stage,
    prompt: &str,
    instruction: &str,
    parse: impl Fn(&str) -> Result<T, ParseError>,
) -> Result<Answer<T>, StageError> {
    let agent = session.agent_name().to_string();
    let mut message = format!("{prompt}\n\n{instruction}");
    let mut attempts = 0;
    loop {
        attempts += 1;
        let reply = session
            .send(ctx.backend, &message)
            .map_err(|source| StageError::Backend { agent: agent.clone(), source })?;
        let event = log.len();
        log.record(stage, &agent, reply.clone());
        match parse(&reply) {
            Ok(value) => return Ok(Answer { value, reply, event }),
            Err(source) => {
                log.record_retry(event);
                if attempts > ctx.parse_retries {
                    return Err(StageError::Parse { agent, attempts, source });
                }
                warn!("{agent}: {stage} reply rejected ({source}); asking again");
                message = reformat_request(&source, instruction);
            }
        }
    }
}

/// Header lines used when relaying what other members said.
pub const DIGEST_HEADER: &str = "In the first round, the other members presented as follows.";
pub const CATCH_UP_HEADER: &str = "Since you last spoke, the discussion continued as follows.";
pub const LEGAL_HEADER: &str = "The legal expert reviewed the proposals.";
pub const MEETING_DIGEST_HEADER: &str = "Summary of the committee discussion so far.";

/// One relayed utterance, e.g. `[Debate] J. Powell:` followed by the text.
pub fn quote(stage: Stage, speaker: &str, text: &str) -> String {
    format!("[{}] {speaker}:\n{}", stage.title(), text.trim())
}

fn relay(header: &str, quotes: &[String]) -> String {
    format!("{header}\n\n{}", quotes.join("\n\n"))
}

/// Stage 1: the economist proposes the three alternatives.
pub fn stage1_alternatives(
    ctx: &StageContext<'_>,
    economist: &mut Session,
    log: &mut EventLog,
) -> Result<AlternativeSet, StageError> {
    let prompt = ctx.render(TemplateKey::Alternatives, Vars::new())?;
    let current = ctx.current_rate;
    let answer = ask(ctx, economist, log, Stage::Alternatives, &prompt, &alternatives_instruction(current), |r| {
        parse_alternatives(r, current)
    })?;
    info!(
        "alternatives: {}",
        answer.value.iter().map(|a| a.headline()).collect::<Vec<_>>().join("; ")
    );
    Ok(answer.value)
}

/// Stage 2: each voter forms a private view. Nothing is relayed to others.
pub fn stage2_private_ideas(
    ctx: &StageContext<'_>,
    voters: &mut [Session],
    log: &mut EventLog,
) -> Result<Vec<PrivateIdea>, StageError> {
    let prompt = ctx.render(TemplateKey::PersonalIdea, Vars::new())?;
    let mut ideas = Vec::with_capacity(voters.len());
    for session in voters.iter_mut() {
        let answer = ask(ctx, session, log, Stage::PrivateIdea, &prompt, STANCE_INSTRUCTION, parse_stance)?;
        log.set_direction(answer.event, answer.value);
        ideas.push(PrivateIdea {
            agent_name: session.agent_name().to_string(),
            direction: answer.value,
            reasoning: answer.reply,
        });
    }
    Ok(ideas)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstRound {
    /// Voter indices in speaking order.
    pub order: Vec<usize>,
    /// Stated direction per voter index.
    pub directions: Vec<VoteDirection>,
}

/// Stage 3: presentations in random order, then a digest of everyone
/// else's presentation queued for each voter.
pub fn stage3_first_round(
    ctx: &StageContext<'_>,
    voters: &mut [Session],
    rng: &mut MeetingRng,
    log: &mut EventLog,
) -> Result<FirstRound, StageError> {
    let order = first_round_order(voters.len(), rng);
    let prompt = ctx.render(TemplateKey::FirstRound, Vars::new())?;
    let mut directions = vec![VoteDirection::Maintain; voters.len()];
    let mut presentations: Vec<(usize, String)> = Vec::with_capacity(voters.len());
    for &i in &order {
        let answer = ask(ctx, &mut voters[i], log, Stage::FirstRound, &prompt, STANCE_INSTRUCTION, parse_stance)?;
        log.set_direction(answer.event, answer.value);
        directions[i] = answer.value;
        presentations.push((i, answer.reply));
    }
    let names = names(voters);
    for (i, session) in voters.iter_mut().enumerate() {
        let quotes: Vec<String> = presentations
            .iter()
            .filter(|(speaker, _)| *speaker != i)
            .map(|(speaker, text)| quote(Stage::FirstRound, &names[*speaker], text))
            .collect();
        if !quotes.is_empty() {
            session.queue_context(relay(DIGEST_HEADER, &quotes));
        }
    }
    Ok(FirstRound { order, directions })
}

fn names(sessions: &[Session]) -> Vec<String> {
    sessions.iter().map(|s| s.agent_name().to_string()).collect()
}

/// One debate turn as recorded for relaying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DebateTurn {
    pub speaker: usize,
    pub reply: String,
    pub direction: VoteDirection,
    /// Utterances relayed to the speaker just before this turn.
    pub caught_up: usize,
}

/// Stage 4: the scheduled debate. Before each turn the speaker is told
/// everything said since their previous turn.
pub fn stage4_debate(
    ctx: &StageContext<'_>,
    voters: &mut [Session],
    alternatives: &AlternativeSet,
    schedule: &DebateSchedule,
    log: &mut EventLog,
) -> Result<Vec<DebateTurn>, StageError> {
    if let Some(&bad) = schedule.turns.iter().find(|&&v| v >= voters.len()) {
        return Err(StageError::Config(format!("debate schedule names voter {bad} of {}", voters.len())));
    }
    let names = names(voters);
    let prompt = ctx.render(TemplateKey::SecondRound, Vars::new().with("alternatives", alternatives.render_list()))?;
    let mut turns: Vec<DebateTurn> = Vec::with_capacity(schedule.turns.len());
    let mut heard = vec![0usize; voters.len()];
    for &v in &schedule.turns {
        let quotes: Vec<String> = turns[heard[v]..]
            .iter()
            .map(|t| quote(Stage::Debate, &names[t.speaker], &t.reply))
            .collect();
        if !quotes.is_empty() {
            voters[v].queue_context(relay(CATCH_UP_HEADER, &quotes));
        }
        let answer = ask(ctx, &mut voters[v], log, Stage::Debate, &prompt, STANCE_INSTRUCTION, parse_stance)?;
        log.set_direction(answer.event, answer.value);
        turns.push(DebateTurn { speaker: v, reply: answer.reply, direction: answer.value, caught_up: quotes.len() });
        heard[v] = turns.len();
    }
    Ok(turns)
}

/// Stage 5a: the legal expert, briefed on the discussion, reviews every
/// alternative. The review is queued for every voter.
pub fn stage5_legal_review(
    ctx: &StageContext<'_>,
    legal: &mut Session,
    voters: &mut [Session],
    alternatives: &AlternativeSet,
    discussion: &[String],
    log: &mut EventLog,
) -> Result<String, StageError> {
    if !discussion.is_empty() {
        legal.queue_context(relay(MEETING_DIGEST_HEADER, discussion));
    }
    let prompt = ctx.render(TemplateKey::LegalReview, Vars::new().with("alternatives", alternatives.render_list()))?;
    let answer = ask(ctx, legal, log, Stage::LegalReview, &prompt, REVIEW_INSTRUCTION, check_review)?;
    let relayed = relay(LEGAL_HEADER, &[quote(Stage::LegalReview, legal.agent_name(), &answer.reply)]);
    for session in voters.iter_mut() {
        session.queue_context(relayed.clone());
    }
    Ok(answer.reply)
}

/// Stage 5b: one vote per voter.
pub fn stage5_vote(
    ctx: &StageContext<'_>,
    voters: &mut [Session],
    alternatives: &AlternativeSet,
    log: &mut EventLog,
) -> Result<Vec<Vote>, StageError> {
    let prompt = ctx.render(TemplateKey::FinalVote, Vars::new().with("alternatives", alternatives.render_list()))?;
    let mut votes = Vec::with_capacity(voters.len());
    for session in voters.iter_mut() {
        let answer = ask(ctx, session, log, Stage::Vote, &prompt, VOTE_INSTRUCTION, |r| parse_vote(r, alternatives))?;
        log.set_direction(answer.event, alternatives.get(answer.value).direction);
        votes.push(Vote { agent_name: session.agent_name().to_string(), choice: answer.value });
    }
    Ok(votes)
}

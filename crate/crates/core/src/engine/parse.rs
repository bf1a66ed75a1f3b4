//! Extraction of the machine-readable lines agents are asked to end with:
//!
//! ```text
//! ALT A: 1.75 | INCREASE | Inflation is firming.
//! STANCE: MAINTAIN
//! VOTE: B
//! ```

use std::collections::BTreeSet;
use std::sync::LazyLock;

use log::warn;
use regex::Regex;
use thiserror::Error;

use super::policy::{AltLabel, AlternativeSet};
use crate::persona::VoteDirection;
use crate::units::PolicyRate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no `ALT {0}: <rate> | <direction> | <rationale>` line")]
    MissingAlternative(AltLabel),
    #[error("alternative {0} given more than once")]
    DuplicateLabel(AltLabel),
    #[error("more than one alternative moves in direction {0}")]
    DuplicateDirection(VoteDirection),
    #[error("alternative {label}: rate {text:?} is not a quarter-point percentage")]
    BadRate { label: AltLabel, text: String },
    #[error("alternative {label}: unknown direction {text:?}")]
    BadDirection { label: AltLabel, text: String },
    #[error("alternative {label} is labelled {stated} but moves the rate {derived}")]
    DirectionMismatch { label: AltLabel, stated: VoteDirection, derived: VoteDirection },
    #[error("alternative {label} targets {target}, more than 0.50 points from {current}")]
    MoveTooLarge { label: AltLabel, target: PolicyRate, current: PolicyRate },
    #[error("no `STANCE: INCREASE|MAINTAIN|DECREASE` line")]
    MissingStance,
    #[error("no vote found")]
    MissingVote,
    #[error("vote is ambiguous between {0:?}")]
    AmbiguousVote(Vec<String>),
    #[error("review does not address alternative(s) {0:?}")]
    MissingReviewLabels(Vec<AltLabel>),
}

pub const STANCE_INSTRUCTION: &str =
    "End your reply with one final line of the form `STANCE: INCREASE`, `STANCE: MAINTAIN` or `STANCE: DECREASE`.";

pub const VOTE_INSTRUCTION: &str = "Answer with one final line of the form `VOTE: A`, `VOTE: B` or `VOTE: C`.";

pub const REVIEW_INSTRUCTION: &str =
    "Comment on each proposal by name: Alternative A, Alternative B and Alternative C.";

pub fn alternatives_instruction(current: PolicyRate) -> String {
    format!(
        "Give exactly one increase, one maintain and one decrease proposal, each at most 0.25 percentage points \
         away from the current {current}. End your reply with three lines of the form \
         `ALT <A|B|C>: <target rate in percent> | <INCREASE|MAINTAIN|DECREASE> | <one-sentence rationale>`, \
         for example `ALT A: {} | INCREASE | ...`.",
        PolicyRate::from_bp(current.bp() + PolicyRate::STEP_BP).expect("step multiple").fixed_percent()
    )
}

/// Follow-up sent when a reply could not be parsed.
pub fn reformat_request(error: &ParseError, instruction: &str) -> String {
    format!("Your previous reply could not be processed: {error}. Please answer again. {instruction}")
}

static ALT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^ALT(?:ERNATIVE)?\s+([ABC])\s*[:.)\-]\s*([^|]+?)\s*\|\s*([A-Za-z]+)\s*(?:\|\s*(.*))?$")
        .expect("valid regex")
});
static STANCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bSTANCE\s*:\s*\**\s*(INCREASE|MAINTAIN|DECREASE)\b").expect("valid regex")
});
static VOTE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bVOTE\s*:\s*(.+)$").expect("valid regex"));
static NAMED_ALT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:alternative|option|proposal|plan)\s+([ABC])\b").expect("valid regex")
});
static LIST_ALT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\W*([ABC])\s*[:).]").expect("valid regex"));
static UP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(rais|increas|hik|tighten)\w*").expect("valid regex"));
static HOLD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(maintain|unchanged|keep|hold)\w*").expect("valid regex"));
static DOWN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(lower|decreas|cut|reduc)\w*").expect("valid regex"));

/// Strips list markers and emphasis so `**ALT A:** ...` and `- VOTE: B` parse.
fn clean_line(line: &str) -> String {
    line.replace("**", "").replace('`', "").trim().trim_start_matches(['-', '*', '#', '>', ' ']).trim().to_string()
}

pub fn parse_alternatives(reply: &str, current: PolicyRate) -> Result<AlternativeSet, ParseError> {
    let mut found: Vec<(AltLabel, String, String, String)> = Vec::new();
    for line in reply.lines() {
        let line = clean_line(line);
        if let Some(caps) = ALT_LINE.captures(&line) {
            let label: AltLabel = caps[1].parse().expect("regex restricts label");
            let entry = (
                label,
                caps[2].to_string(),
                caps[3].to_string(),
                caps.get(4).map(|m| m.as_str().trim().to_string()).unwrap_or_default(),
            );
            // a later line for the same label replaces an earlier one
            found.retain(|e| e.0 != label);
            found.push(entry);
        }
    }
    let mut alternatives = Vec::with_capacity(3);
    for (label, rate, dir, rationale) in found {
        let target = PolicyRate::parse_percent(&rate).map_err(|_| ParseError::BadRate { label, text: rate.clone() })?;
        let direction =
            VoteDirection::from_keyword(&dir).ok_or_else(|| ParseError::BadDirection { label, text: dir.clone() })?;
        alternatives.push(super::policy::Alternative { label, target, direction, rationale });
    }
    for label in AltLabel::ALL {
        if !alternatives.iter().any(|a| a.label == label) {
            return Err(ParseError::MissingAlternative(label));
        }
    }
    let set = AlternativeSet::new(current, alternatives)?;
    for alt in set.iter() {
        if alt.target.diff_bp(current).unsigned_abs() > u64::from(PolicyRate::STEP_BP) {
            warn!("alternative {} moves more than one step ({} from {current})", alt.label, alt.target);
        }
    }
    Ok(set)
}

/// The last `STANCE:` tag in the reply.
pub fn parse_stance(reply: &str) -> Result<VoteDirection, ParseError> {
    STANCE
        .captures_iter(reply)
        .last()
        .and_then(|c| VoteDirection::from_keyword(&c[1]))
        .ok_or(ParseError::MissingStance)
}

fn direction_families(text: &str) -> BTreeSet<VoteDirection> {
    let mut dirs = BTreeSet::new();
    if UP.is_match(text) {
        dirs.insert(VoteDirection::Increase);
    }
    if HOLD.is_match(text) {
        dirs.insert(VoteDirection::Maintain);
    }
    if DOWN.is_match(text) {
        dirs.insert(VoteDirection::Decrease);
    }
    dirs
}

fn ambiguous_labels(labels: &BTreeSet<AltLabel>) -> ParseError {
    ParseError::AmbiguousVote(labels.iter().map(|l| l.to_string()).collect())
}

fn single_label(labels: BTreeSet<AltLabel>) -> Result<Option<AltLabel>, ParseError> {
    match labels.len() {
        0 => Ok(None),
        1 => Ok(labels.into_iter().next()),
        _ => Err(ambiguous_labels(&labels)),
    }
}

fn by_direction(text: &str, alternatives: &AlternativeSet) -> Result<Option<AltLabel>, ParseError> {
    let dirs = direction_families(text);
    match dirs.len() {
        0 => Ok(None),
        1 => Ok(Some(alternatives.with_direction(*dirs.iter().next().expect("one")).label)),
        _ => Err(ParseError::AmbiguousVote(dirs.iter().map(|d| d.keyword().to_string()).collect())),
    }
}

/// Bare letters in a short answer ("B", "A or B"). A capital "A" followed by a
/// lower-case word is read as the article, not a label.
fn bare_labels(text: &str) -> BTreeSet<AltLabel> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() > 8 {
        return BTreeSet::new();
    }
    let mut labels = BTreeSet::new();
    for (i, w) in words.iter().enumerate() {
        let token = w.trim_matches(|c: char| !c.is_alphanumeric());
        let Ok(label) = token.parse::<AltLabel>() else { continue };
        if token.chars().all(|c| c.is_ascii_lowercase()) {
            continue;
        }
        if label == AltLabel::A {
            let next = words.get(i + 1).map(|n| n.trim_matches(|c: char| !c.is_alphanumeric()));
            if matches!(next, Some(n) if n.starts_with(|c: char| c.is_lowercase()) && n != "or" && n != "and") {
                continue;
            }
        }
        labels.insert(label);
    }
    labels
}

/// Resolves a vote reply to one label.
///
/// A `VOTE:` line wins when present (its value must be one label or one
/// direction). Otherwise the reply is searched for named alternatives, then
/// bare letters, then direction words mapped to the matching alternative.
pub fn parse_vote(reply: &str, alternatives: &AlternativeSet) -> Result<AltLabel, ParseError> {
    let vote_line = reply.lines().map(clean_line).filter_map(|l| VOTE_LINE.captures(&l).map(|c| c[1].to_string())).next_back();
    if let Some(value) = vote_line {
        let named: BTreeSet<AltLabel> =
            NAMED_ALT.captures_iter(&value).filter_map(|c| c[1].parse().ok()).collect();
        if let Some(label) = single_label(named)? {
            return Ok(label);
        }
        if let Some(label) = single_label(bare_labels(&value))? {
            return Ok(label);
        }
        if let Some(dir) = VoteDirection::from_keyword(value.trim_matches(|c: char| !c.is_alphanumeric())) {
            return Ok(alternatives.with_direction(dir).label);
        }
        return by_direction(&value, alternatives)?.ok_or(ParseError::MissingVote);
    }
    let named: BTreeSet<AltLabel> = NAMED_ALT.captures_iter(reply).filter_map(|c| c[1].parse().ok()).collect();
    if let Some(label) = single_label(named)? {
        return Ok(label);
    }
    if let Some(label) = single_label(bare_labels(reply))? {
        return Ok(label);
    }
    by_direction(reply, alternatives)?.ok_or(ParseError::MissingVote)
}

/// Checks that a legal review names every alternative.
pub fn check_review(reply: &str) -> Result<(), ParseError> {
    let mut seen: BTreeSet<AltLabel> = NAMED_ALT.captures_iter(reply).filter_map(|c| c[1].parse().ok()).collect();
    seen.extend(LIST_ALT.captures_iter(reply).filter_map(|c| c[1].parse::<AltLabel>().ok()));
    let missing: Vec<AltLabel> = AltLabel::ALL.into_iter().filter(|l| !seen.contains(l)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ParseError::MissingReviewLabels(missing))
    }
}

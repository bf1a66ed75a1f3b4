//! Plurality count with a chair / vice chair / label-order tie-break.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::policy::{AltLabel, Vote};
use crate::persona::{Role, Roster};

/// How the winner was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// A single label had the most votes.
    None,
    Chair,
    ViceChair,
    LabelOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub counts: BTreeMap<AltLabel, u32>,
    pub winner: AltLabel,
    pub tie_break: TieBreak,
}

fn vote_of(votes: &[Vote], roster: &Roster, role: Role) -> Option<AltLabel> {
    let name = &roster.agents().iter().find(|a| a.role == role)?.name;
    votes.iter().find(|v| &v.agent_name == name).map(|v| v.choice)
}

/// Counts votes (every label appears in `counts`, possibly with 0) and
/// picks the plurality winner. Ties go to the chair's choice if it is among
/// the tied labels, else the vice chair's, else the earliest label.
pub fn tally(votes: &[Vote], roster: &Roster) -> TallyResult {
    let mut counts: BTreeMap<AltLabel, u32> = AltLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for v in votes {
        *counts.get_mut(&v.choice).expect("all labels present") += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let tied: Vec<AltLabel> = counts.iter().filter(|(_, &c)| c == top).map(|(&l, _)| l).collect();
    let (winner, tie_break) = if tied.len() == 1 {
        (tied[0], TieBreak::None)
    } else if let Some(c) = vote_of(votes, roster, Role::Chair).filter(|c| tied.contains(c)) {
        (c, TieBreak::Chair)
    } else if let Some(c) = vote_of(votes, roster, Role::ViceChair).filter(|c| tied.contains(c)) {
        (c, TieBreak::ViceChair)
    } else {
        (tied[0], TieBreak::LabelOrder)
    };
    TallyResult { counts, winner, tie_break }
}

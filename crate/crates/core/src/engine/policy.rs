//! Policy alternatives and votes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parse::ParseError;
use crate::persona::VoteDirection;
use crate::units::PolicyRate;

/// Largest accepted distance between an alternative and the current rate.
pub const MAX_MOVE_BP: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AltLabel {
    A,
    B,
    C,
}

impl AltLabel {
    pub const ALL: [AltLabel; 3] = [AltLabel::A, AltLabel::B, AltLabel::C];

    pub fn as_char(self) -> char {
        match self {
            AltLabel::A => 'A',
            AltLabel::B => 'B',
            AltLabel::C => 'C',
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AltLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for AltLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(AltLabel::A),
            "B" | "b" => Ok(AltLabel::B),
            "C" | "c" => Ok(AltLabel::C),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    pub label: AltLabel,
    pub target: PolicyRate,
    pub direction: VoteDirection,
    pub rationale: String,
}

impl Alternative {
    /// "Alternative A: 1.75% (increase)"
    pub fn headline(&self) -> String {
        format!("Alternative {}: {} ({})", self.label, self.target.fixed_percent(), self.direction)
    }
}

/// Exactly three alternatives labelled A, B, C with one increase, one
/// maintain and one decrease among them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Alternative>", into = "Vec<Alternative>")]
pub struct AlternativeSet {
    alternatives: [Alternative; 3],
}

impl AlternativeSet {
    /// Builds a set from `(label, target, rationale)` triples, deriving each
    /// direction from `current`.
    pub fn from_targets(
        current: PolicyRate,
        entries: impl IntoIterator<Item = (AltLabel, PolicyRate, String)>,
    ) -> Result<Self, ParseError> {
        let alternatives = entries
            .into_iter()
            .map(|(label, target, rationale)| Alternative {
                label,
                target,
                direction: VoteDirection::between(current, target),
                rationale,
            })
            .collect();
        Self::new(current, alternatives)
    }

    pub fn new(current: PolicyRate, alternatives: Vec<Alternative>) -> Result<Self, ParseError> {
        for alt in &alternatives {
            let derived = VoteDirection::between(current, alt.target);
            if derived != alt.direction {
                return Err(ParseError::DirectionMismatch { label: alt.label, stated: alt.direction, derived });
            }
            if alt.target.diff_bp(current).unsigned_abs() > u64::from(MAX_MOVE_BP) {
                return Err(ParseError::MoveTooLarge { label: alt.label, target: alt.target, current });
            }
        }
        let set = Self::validated(alternatives)?;
        Ok(set)
    }

    fn validated(alternatives: Vec<Alternative>) -> Result<Self, ParseError> {
        let mut slots: [Option<Alternative>; 3] = [None, None, None];
        for alt in alternatives {
            let i = alt.label.index();
            if slots[i].is_some() {
                return Err(ParseError::DuplicateLabel(alt.label));
            }
            slots[i] = Some(alt);
        }
        for label in AltLabel::ALL {
            if slots[label.index()].is_none() {
                return Err(ParseError::MissingAlternative(label));
            }
        }
        let [a, b, c] = slots.map(|s| s.expect("checked"));
        for dir in VoteDirection::ALL {
            let n = [&a, &b, &c].iter().filter(|x| x.direction == dir).count();
            if n > 1 {
                return Err(ParseError::DuplicateDirection(dir));
            }
        }
        Ok(Self { alternatives: [a, b, c] })
    }

    pub fn get(&self, label: AltLabel) -> &Alternative {
        &self.alternatives[label.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Alternative> {
        self.alternatives.iter()
    }

    /// The unique alternative moving in `direction`.
    pub fn with_direction(&self, direction: VoteDirection) -> &Alternative {
        self.alternatives.iter().find(|a| a.direction == direction).expect("one per direction")
    }

    /// One line per alternative, as shown to agents.
    pub fn render_list(&self) -> String {
        self.alternatives
            .iter()
            .map(|a| {
                if a.rationale.is_empty() {
                    format!("- {}", a.headline())
                } else {
                    format!("- {}. {}", a.headline(), a.rationale)
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl TryFrom<Vec<Alternative>> for AlternativeSet {
    type Error = ParseError;

    fn try_from(v: Vec<Alternative>) -> Result<Self, Self::Error> {
        Self::validated(v)
    }
}

impl From<AlternativeSet> for Vec<Alternative> {
    fn from(s: AlternativeSet) -> Self {
        s.alternatives.into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub agent_name: String,
    pub choice: AltLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateIdea {
    pub agent_name: String,
    pub direction: VoteDirection,
    pub reasoning: String,
}

//! Builds a [`Script`] for one meeting from per-agent lines, placing each
//! reply at the ordinal the meeting will ask for it.

use serde::{Deserialize, Serialize};

use crate::backend::Script;
use crate::persona::VoteDirection;

/// What one voter says, stage by stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoterLines {
    pub name: String,
    pub private_idea: String,
    pub first_round: String,
    /// One reply per debate turn, in the order the voter speaks.
    pub debate: Vec<String>,
    pub vote: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingScript {
    /// Prompts each agent answers before the stages: the cleanse, every
    /// materials chunk and any probe attempts. Those replies come from
    /// `default_reply`.
    pub setup_turns: usize,
    pub default_reply: String,
    pub economist: String,
    pub alternatives: String,
    pub legal_expert: String,
    pub legal_review: String,
    pub voters: Vec<VoterLines>,
}

impl MeetingScript {
    pub fn to_script(&self) -> Script {
        let mut script = Script::default().default_reply(self.default_reply.clone());
        let first = self.setup_turns + 1;
        script.insert(&self.economist, first, self.alternatives.clone());
        script.insert(&self.legal_expert, first, self.legal_review.clone());
        for v in &self.voters {
            script.insert(&v.name, first, v.private_idea.clone());
            script.insert(&v.name, first + 1, v.first_round.clone());
            for (k, line) in v.debate.iter().enumerate() {
                script.insert(&v.name, first + 2 + k, line.clone());
            }
            script.insert(&v.name, first + 2 + v.debate.len(), v.vote.clone());
        }
        script
    }
}

/// `text` followed by the stance tag the parser expects.
pub fn with_stance(text: &str, direction: VoteDirection) -> String {
    format!("{}\n\nSTANCE: {}", text.trim_end(), direction.keyword())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinals_follow_setup() {
        let ms = MeetingScript {
            setup_turns: 3,
            default_reply: "Completed".into(),
            economist: "E".into(),
            alternatives: "alts".into(),
            legal_expert: "L".into(),
            legal_review: "review".into(),
            voters: vec![VoterLines {
                name: "V".into(),
                private_idea: "idea".into(),
                first_round: "first".into(),
                debate: vec!["d1".into(), "d2".into()],
                vote: "VOTE: A".into(),
            }],
        };
        let s = ms.to_script();
        assert_eq!(s.replies["E"][&4], "alts");
        assert_eq!(s.replies["L"][&4], "review");
        let v = &s.replies["V"];
        assert_eq!((v[&4].as_str(), v[&5].as_str(), v[&6].as_str(), v[&7].as_str(), v[&8].as_str()), ("idea", "first", "d1", "d2", "VOTE: A"));
    }
}

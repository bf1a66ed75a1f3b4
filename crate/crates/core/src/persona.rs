//! Meeting participants: roles, profiles, rosters and the persona prompts
//! that open each agent's session.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::{TemplateError, TemplateKey, TemplateSet, Vars};
use crate::units::{MeetingDate, PolicyRate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Chair,
    ViceChair,
    RegionalPresident,
    Governor,
    Economist,
    LegalExpert,
}

impl Role {
    pub fn is_voting(self) -> bool {
        !matches!(self, Role::Economist | Role::LegalExpert)
    }

    /// Title used in the character prompt when the profile does not override it.
    pub fn default_title(self) -> &'static str {
        match self {
            Role::Chair => "Federal Reserve Chairman",
            Role::ViceChair => "FOMC Vice Chairman",
            Role::RegionalPresident => "Federal Reserve Bank President",
            Role::Governor => "Federal Reserve Governor",
            Role::Economist => "Federal Reserve staff economist",
            Role::LegalExpert => "Federal Reserve legal expert",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Chair => "chair",
            Role::ViceChair => "vice_chair",
            Role::RegionalPresident => "regional_president",
            Role::Governor => "governor",
            Role::Economist => "economist",
            Role::LegalExpert => "legal_expert",
        };
        f.write_str(s)
    }
}

/// Direction of a policy move relative to the current rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteDirection {
    #[serde(alias = "INCREASE", alias = "Increase", alias = "up")]
    Increase,
    #[serde(alias = "MAINTAIN", alias = "Maintain", alias = "hold")]
    Maintain,
    #[serde(alias = "DECREASE", alias = "Decrease", alias = "down")]
    Decrease,
}

impl VoteDirection {
    pub const ALL: [VoteDirection; 3] =
        [VoteDirection::Increase, VoteDirection::Maintain, VoteDirection::Decrease];

    /// Direction of moving from `current` to `target`.
    pub fn between(current: PolicyRate, target: PolicyRate) -> Self {
        match target.cmp(&current) {
            std::cmp::Ordering::Greater => VoteDirection::Increase,
            std::cmp::Ordering::Equal => VoteDirection::Maintain,
            std::cmp::Ordering::Less => VoteDirection::Decrease,
        }
    }

    /// Keyword used in structured reply lines (`STANCE: INCREASE`).
    pub fn keyword(self) -> &'static str {
        match self {
            VoteDirection::Increase => "INCREASE",
            VoteDirection::Maintain => "MAINTAIN",
            VoteDirection::Decrease => "DECREASE",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word.trim().to_ascii_uppercase().as_str() {
            "INCREASE" => Some(VoteDirection::Increase),
            "MAINTAIN" => Some(VoteDirection::Maintain),
            "DECREASE" => Some(VoteDirection::Decrease),
            _ => None,
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            VoteDirection::Increase => "↑",
            VoteDirection::Maintain => "→",
            VoteDirection::Decrease => "↓",
        }
    }

    /// Lower-case verb for operator output ("Decided: maintain at 1.50%").
    pub fn verb(self) -> &'static str {
        match self {
            VoteDirection::Increase => "increase",
            VoteDirection::Maintain => "maintain",
            VoteDirection::Decrease => "decrease",
        }
    }

    fn viewpoint_phrase(self) -> &'static str {
        match self {
            VoteDirection::Increase => "Raise interest rates",
            VoteDirection::Maintain => "Keep interest rates unchanged",
            VoteDirection::Decrease => "Lower interest rates",
        }
    }
}

impl fmt::Display for VoteDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verb())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentProfile {
    /// Short display name, also the key used in ground-truth records ("J. Powell").
    pub name: String,
    /// Name used inside prompts; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_name: Option<String>,
    /// Role title used inside prompts; defaults to [`Role::default_title`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub role: Role,
    #[serde(default)]
    pub gender: String,
    #[serde(default)]
    pub education: Vec<String>,
    #[serde(default)]
    pub past_positions: Vec<String>,
    #[serde(default)]
    pub stance: String,
    #[serde(default)]
    pub personality: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_viewpoint: Option<VoteDirection>,
}

impl AgentProfile {
    pub fn is_voting(&self) -> bool {
        self.role.is_voting()
    }

    pub fn prompt_name(&self) -> &str {
        self.full_name.as_deref().unwrap_or(&self.name)
    }

    pub fn prompt_title(&self) -> &str {
        self.title.as_deref().unwrap_or_else(|| self.role.default_title())
    }

    fn check(&self) -> Result<(), RosterError> {
        if self.name.trim().is_empty() {
            return Err(RosterError::EmptyName);
        }
        if self.is_voting() {
            for (field, value) in [("stance", &self.stance), ("personality", &self.personality)] {
                if value.trim().is_empty() {
                    return Err(RosterError::MissingText { agent: self.name.clone(), field });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RosterError {
    #[error("failed to read roster {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed roster file: {0}")]
    Parse(String),
    #[error("agent with empty name")]
    EmptyName,
    #[error("duplicate agent name {0:?}")]
    DuplicateName(String),
    #[error("agent {agent:?} is a voting member but has an empty {field}")]
    MissingText { agent: String, field: &'static str },
    #[error("roster must have exactly one economist, found {0}")]
    EconomistCount(usize),
    #[error("roster must have exactly one legal expert, found {0}")]
    LegalExpertCount(usize),
    #[error("roster must have exactly one chair, found {0}")]
    ChairCount(usize),
    #[error("roster must have at most one vice chair, found {0}")]
    ViceChairCount(usize),
    #[error("roster needs at least {min} voting members, found {found}")]
    TooFewVoters { min: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    agents: Vec<AgentProfile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RosterFile {
    agent: Vec<AgentProfile>,
}

impl Roster {
    pub const MIN_VOTERS: usize = 3;

    pub fn new(agents: Vec<AgentProfile>) -> Result<Self, RosterError> {
        let mut names = HashSet::new();
        for agent in &agents {
            agent.check()?;
            if !names.insert(agent.name.as_str()) {
                return Err(RosterError::DuplicateName(agent.name.clone()));
            }
        }
        let count = |role: Role| agents.iter().filter(|a| a.role == role).count();
        match count(Role::Economist) {
            1 => {}
            n => return Err(RosterError::EconomistCount(n)),
        }
        match count(Role::LegalExpert) {
            1 => {}
            n => return Err(RosterError::LegalExpertCount(n)),
        }
        match count(Role::Chair) {
            1 => {}
            n => return Err(RosterError::ChairCount(n)),
        }
        let vice = count(Role::ViceChair);
        if vice > 1 {
            return Err(RosterError::ViceChairCount(vice));
        }
        let voters = agents.iter().filter(|a| a.is_voting()).count();
        if voters < Self::MIN_VOTERS {
            return Err(RosterError::TooFewVoters { min: Self::MIN_VOTERS, found: voters });
        }
        Ok(Self { agents })
    }

    /// Parses the TOML roster schema (`[[agent]]` tables).
    pub fn from_toml(text: &str) -> Result<Self, RosterError> {
        let file: RosterFile = toml::from_str(text).map_err(|e| RosterError::Parse(e.to_string()))?;
        Self::new(file.agent)
    }

    pub fn agents(&self) -> &[AgentProfile] {
        &self.agents
    }

    pub fn get(&self, name: &str) -> Option<&AgentProfile> {
        self.agents.iter().find(|a| a.name == name)
    }

    fn sole(&self, role: Role) -> &AgentProfile {
        self.agents.iter().find(|a| a.role == role).expect("validated roster")
    }

    pub fn economist(&self) -> &AgentProfile {
        self.sole(Role::Economist)
    }

    pub fn legal_expert(&self) -> &AgentProfile {
        self.sole(Role::LegalExpert)
    }

    pub fn chair(&self) -> &AgentProfile {
        self.sole(Role::Chair)
    }

    pub fn vice_chair(&self) -> Option<&AgentProfile> {
        self.agents.iter().find(|a| a.role == Role::ViceChair)
    }
}

pub fn load_roster(path: &Path) -> Result<Roster, RosterError> {
    let text = fs::read_to_string(path)
        .map_err(|source| RosterError::Io { path: path.display().to_string(), source })?;
    Roster::from_toml(&text)
}

/// Voting members in roster order: everyone except the economist and the legal expert.
pub fn voting_agents(roster: &Roster) -> Vec<&AgentProfile> {
    roster.agents().iter().filter(|a| a.is_voting()).collect()
}

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("agent {agent:?} has an empty {field}")]
    MissingText { agent: String, field: &'static str },
}

/// Renders the character, socio-demographic and personality prompts, in
/// that order, separated by blank lines. Used as the session's system prompt.
pub fn render_character_prompt(
    profile: &AgentProfile,
    meeting_date: MeetingDate,
    current_rate: PolicyRate,
    templates: &TemplateSet,
) -> Result<String, PersonaError> {
    if let Err(RosterError::MissingText { agent, field }) = profile.check() {
        return Err(PersonaError::MissingText { agent, field });
    }
    let mut vars = Vars::new()
        .with("name", profile.name.clone())
        .with("full_name", profile.prompt_name())
        .with("role_title", profile.prompt_title())
        .with("meeting_date", meeting_date.long_name())
        .with("current_rate", current_rate.fixed_percent())
        .with("stance", profile.stance.trim())
        .with("personality", profile.personality.trim())
        .with("gender", profile.gender.trim())
        .with("education", profile.education.join("; "))
        .with("past_positions", profile.past_positions.join("; "));

    let mut parts = vec![
        templates.render(TemplateKey::Character, &vars)?,
        templates.render(TemplateKey::SocioDemographic, &vars)?,
    ];
    let mut personality = templates.render(TemplateKey::Personality, &vars)?;
    if let Some(view) = profile.initial_viewpoint {
        vars.set("viewpoint", view.viewpoint_phrase());
        personality.push(' ');
        personality.push_str(&templates.render(TemplateKey::Viewpoint, &vars)?);
    }
    parts.push(personality);
    Ok(parts.join("\n\n"))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn profile(name: &str, role: Role) -> AgentProfile {
        AgentProfile {
            name: name.to_string(),
            full_name: None,
            title: None,
            role,
            gender: "Female".into(),
            education: vec!["Ph.D. in Economics".into()],
            past_positions: vec!["Research director".into()],
            stance: format!("{name} weighs inflation against employment."),
            personality: format!("{name} is deliberate."),
            initial_viewpoint: None,
        }
    }

    pub(crate) fn small_roster(voters: usize) -> Roster {
        let mut agents = vec![profile("Chair", Role::Chair)];
        for i in 1..voters {
            agents.push(profile(&format!("Voter {i}"), Role::Governor));
        }
        agents.push(profile("Economist", Role::Economist));
        agents.push(profile("Counsel", Role::LegalExpert));
        Roster::new(agents).unwrap()
    }

    fn powell() -> AgentProfile {
        AgentProfile {
            name: "J. Powell".into(),
            full_name: Some("Jerome H. Powell".into()),
            title: None,
            role: Role::Chair,
            gender: "Male".into(),
            education: vec![
                "Bachelor's degree in Politics from Princeton University".into(),
                "J.D. from Georgetown University".into(),
            ],
            past_positions: vec!["Partner at The Carlyle Group".into()],
            stance: "Focused on maintaining overall economic stability.".into(),
            personality: "Humble and inclusive leadership style.".into(),
            initial_viewpoint: Some(VoteDirection::Maintain),
        }
    }

    #[test]
    fn character_prompt_layout() {
        let date: MeetingDate = "2018-05".parse().unwrap();
        let rate = PolicyRate::from_bp(150).unwrap();
        let text = render_character_prompt(&powell(), date, rate, &TemplateSet::builtin()).unwrap();
        assert!(text.starts_with(
            "You will play the role of Federal Reserve Chairman Jerome H. Powell, participating in the May 2018 FOMC meeting"
        ));
        let stance = text.find("Stance: Focused").unwrap();
        let gender = text.find("Gender: Male").unwrap();
        let personality = text.find("Personality: Humble").unwrap();
        assert!(stance < gender && gender < personality);
        assert!(text.contains("Princeton University; J.D. from Georgetown"));
        assert!(text.ends_with("Viewpoint: Keep interest rates unchanged."));
        // determinism
        let again = render_character_prompt(&powell(), date, rate, &TemplateSet::builtin()).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn empty_stance_is_a_render_error() {
        let mut p = powell();
        p.stance = "  ".into();
        let date: MeetingDate = "2018-05".parse().unwrap();
        let err = render_character_prompt(&p, date, PolicyRate::from_bp(150).unwrap(), &TemplateSet::builtin())
            .unwrap_err();
        assert!(matches!(err, PersonaError::MissingText { field: "stance", .. }));
    }

    #[test]
    fn unknown_template_variable_is_named() {
        let mut set = TemplateSet::builtin();
        set.replace(TemplateKey::Personality, "Likes {favorite_color}");
        let date: MeetingDate = "2018-05".parse().unwrap();
        let err = render_character_prompt(&powell(), date, PolicyRate::from_bp(150).unwrap(), &set)
            .unwrap_err();
        assert!(err.to_string().contains("favorite_color"));
    }

    #[test]
    fn roster_validation() {
        let base = small_roster(5);
        assert_eq!(voting_agents(&base).len(), 5);

        let no_econ: Vec<_> =
            base.agents().iter().filter(|a| a.role != Role::Economist).cloned().collect();
        assert!(matches!(Roster::new(no_econ), Err(RosterError::EconomistCount(0))));

        let mut two_econ = base.agents().to_vec();
        two_econ.push(profile("Economist 2", Role::Economist));
        let err = Roster::new(two_econ).unwrap_err();
        assert!(matches!(err, RosterError::EconomistCount(2)));

        let mut dup = base.agents().to_vec();
        dup.push(profile("Voter 1", Role::RegionalPresident));
        assert!(matches!(Roster::new(dup), Err(RosterError::DuplicateName(n)) if n == "Voter 1"));

        let mut two_chairs = base.agents().to_vec();
        two_chairs.push(profile("Chair 2", Role::Chair));
        assert!(matches!(Roster::new(two_chairs), Err(RosterError::ChairCount(2))));

        let mut two_vice = base.agents().to_vec();
        two_vice.push(profile("V1", Role::ViceChair));
        two_vice.push(profile("V2", Role::ViceChair));
        assert!(matches!(Roster::new(two_vice), Err(RosterError::ViceChairCount(2))));

        let too_few = vec![
            profile("Chair", Role::Chair),
            profile("G", Role::Governor),
            profile("E", Role::Economist),
            profile("L", Role::LegalExpert),
        ];
        assert!(matches!(Roster::new(too_few), Err(RosterError::TooFewVoters { found: 2, .. })));

        let mut blank = profile("X", Role::Governor);
        blank.personality.clear();
        let mut agents = base.agents().to_vec();
        agents.push(blank);
        assert!(matches!(Roster::new(agents), Err(RosterError::MissingText { field: "personality", .. })));
    }

    #[test]
    fn non_voting_roles_may_omit_stance() {
        let mut agents = small_roster(3).agents().to_vec();
        for a in agents.iter_mut().filter(|a| !a.is_voting()) {
            a.stance.clear();
            a.personality.clear();
        }
        assert!(Roster::new(agents).is_ok());
    }

    #[test]
    fn toml_roster_round_trip_and_errors() {
        let text = r#"
[[agent]]
name = "A"
role = "chair"
stance = "s"
personality = "p"

[[agent]]
name = "B"
role = "vice_chair"
stance = "s"
personality = "p"

[[agent]]
name = "C"
role = "regional_president"
stance = "s"
personality = "p"
initial_viewpoint = "increase"

[[agent]]
name = "E"
role = "economist"

[[agent]]
name = "L"
role = "legal_expert"
"#;
        let roster = Roster::from_toml(text).unwrap();
        assert_eq!(voting_agents(&roster).len(), 3);
        assert_eq!(roster.get("C").unwrap().initial_viewpoint, Some(VoteDirection::Increase));
        assert!(matches!(Roster::from_toml("[[agent]]\nname = 3"), Err(RosterError::Parse(_))));
        assert!(matches!(
            Roster::from_toml(&text.replace("\"legal_expert\"", "\"economist\"")),
            Err(RosterError::EconomistCount(2))
        ));
        assert!(matches!(Roster::from_toml(&text.replace("\"chair\"", "\"janitor\"")), Err(RosterError::Parse(_))));
    }

    proptest::proptest! {
        #[test]
        fn voters_are_roster_minus_two(n_gov in 0usize..6, n_reg in 0usize..6, vice in proptest::bool::ANY) {
            proptest::prop_assume!(1 + n_gov + n_reg + usize::from(vice) >= Roster::MIN_VOTERS);
            let mut agents = vec![profile("Chair", Role::Chair)];
            if vice { agents.push(profile("Vice", Role::ViceChair)); }
            for i in 0..n_gov { agents.push(profile(&format!("G{i}"), Role::Governor)); }
            agents.push(profile("Economist", Role::Economist));
            for i in 0..n_reg { agents.push(profile(&format!("R{i}"), Role::RegionalPresident)); }
            agents.push(profile("Counsel", Role::LegalExpert));
            let roster = Roster::new(agents).unwrap();
            let voters = voting_agents(&roster);
            proptest::prop_assert_eq!(voters.len(), roster.agents().len() - 2);
            let order: Vec<_> = roster.agents().iter().filter(|a| a.is_voting()).map(|a| &a.name).collect();
            let got: Vec<_> = voters.iter().map(|a| &a.name).collect();
            proptest::prop_assert_eq!(got, order);
        }
    }
}

//! Plain-text prompt templates with `{variable}` placeholders.
//!
//! A placeholder is `{` + identifier + `}`. `{{` and `}}` produce literal
//! braces; any other brace sequence is copied through unchanged.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {template:?} references unresolved variable {{{variable}}}")]
    Unresolved { template: String, variable: String },
    #[error("failed to read template {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("template directory {0} does not exist")]
    MissingDir(PathBuf),
}

/// Every template the simulator sends, keyed by file stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateKey {
    Character,
    SocioDemographic,
    Personality,
    Viewpoint,
    Cleanse,
    MaterialsLearning,
    Probe,
    ProbeRetry,
    Contamination,
    Alternatives,
    PersonalIdea,
    FirstRound,
    SecondRound,
    LegalReview,
    FinalVote,
}

impl TemplateKey {
    pub const ALL: [TemplateKey; 15] = [
        TemplateKey::Character,
        TemplateKey::SocioDemographic,
        TemplateKey::Personality,
        TemplateKey::Viewpoint,
        TemplateKey::Cleanse,
        TemplateKey::MaterialsLearning,
        TemplateKey::Probe,
        TemplateKey::ProbeRetry,
        TemplateKey::Contamination,
        TemplateKey::Alternatives,
        TemplateKey::PersonalIdea,
        TemplateKey::FirstRound,
        TemplateKey::SecondRound,
        TemplateKey::LegalReview,
        TemplateKey::FinalVote,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateKey::Character => "character",
            TemplateKey::SocioDemographic => "socio_demographic",
            TemplateKey::Personality => "personality",
            TemplateKey::Viewpoint => "viewpoint",
            TemplateKey::Cleanse => "cleanse",
            TemplateKey::MaterialsLearning => "materials_learning",
            TemplateKey::Probe => "probe",
            TemplateKey::ProbeRetry => "probe_retry",
            TemplateKey::Contamination => "contamination",
            TemplateKey::Alternatives => "alternatives",
            TemplateKey::PersonalIdea => "personal_idea",
            TemplateKey::FirstRound => "first_round",
            TemplateKey::SecondRound => "second_round",
            TemplateKey::LegalReview => "legal_review",
            TemplateKey::FinalVote => "final_vote",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateKey::Character => include_str!("../templates/character.txt"),
            TemplateKey::SocioDemographic => include_str!("../templates/socio_demographic.txt"),
            TemplateKey::Personality => include_str!("../templates/personality.txt"),
            TemplateKey::Viewpoint => include_str!("../templates/viewpoint.txt"),
            TemplateKey::Cleanse => include_str!("../templates/cleanse.txt"),
            TemplateKey::MaterialsLearning => include_str!("../templates/materials_learning.txt"),
            TemplateKey::Probe => include_str!("../templates/probe.txt"),
            TemplateKey::ProbeRetry => include_str!("../templates/probe_retry.txt"),
            TemplateKey::Contamination => include_str!("../templates/contamination.txt"),
            TemplateKey::Alternatives => include_str!("../templates/alternatives.txt"),
            TemplateKey::PersonalIdea => include_str!("../templates/personal_idea.txt"),
            TemplateKey::FirstRound => include_str!("../templates/first_round.txt"),
            TemplateKey::SecondRound => include_str!("../templates/second_round.txt"),
            TemplateKey::LegalReview => include_str!("../templates/legal_review.txt"),
            TemplateKey::FinalVote => include_str!("../templates/final_vote.txt"),
        }
    }
}

impl fmt::Display for TemplateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// A single parsed template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    source: String,
}

impl Template {
    pub fn new(name: impl Into<String>, source: impl Into<String>) -> Self {
        Self { name: name.into(), source: source.into() }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Names of all placeholders, in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for piece in tokenize(&self.source) {
            if let Piece::Var(v) = piece {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn render(&self, vars: &Vars) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len() + 64);
        for piece in tokenize(&self.source) {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Var(v) => match vars.get(v) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(TemplateError::Unresolved {
                            template: self.name.clone(),
                            variable: v.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Variable bindings for [`Template::render`].
#[derive(Debug, Clone, Default)]
pub struct Vars(HashMap<String, String>);

impl Vars {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

enum Piece<'a> {
    Text(&'a str),
    Var(&'a str),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn tokenize(src: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let bytes = src.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                pieces.push(Piece::Text(&src[start..i + 1]));
                i += 2;
                start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                pieces.push(Piece::Text(&src[start..i + 1]));
                i += 2;
                start = i;
            }
            b'{' => {
                if let Some(rel) = src[i + 1..].find('}') {
                    let name = &src[i + 1..i + 1 + rel];
                    if is_ident(name) {
                        pieces.push(Piece::Text(&src[start..i]));
                        pieces.push(Piece::Var(name));
                        i += rel + 2;
                        start = i;
                        continue;
                    }
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    pieces.push(Piece::Text(&src[start..]));
    pieces
}

/// The full set of prompt templates used by a run.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateKey, Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    /// Templates compiled into the binary.
    pub fn builtin() -> Self {
        let templates = TemplateKey::ALL
            .iter()
            .map(|&k| (k, Template::new(k.file_stem(), k.builtin().trim_end())))
            .collect();
        Self { templates }
    }

    /// Loads `<stem>.txt` files from `dir`; stems without a file keep the built-in text.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        if !dir.is_dir() {
            return Err(TemplateError::MissingDir(dir.to_path_buf()));
        }
        let mut set = Self::builtin();
        for key in TemplateKey::ALL {
            let path = dir.join(format!("{}.txt", key.file_stem()));
            if path.exists() {
                let text = fs::read_to_string(&path)
                    .map_err(|source| TemplateError::Io { path: path.clone(), source })?;
                set.templates.insert(key, Template::new(key.file_stem(), text.trim_end()));
            }
        }
        Ok(set)
    }

    pub fn get(&self, key: TemplateKey) -> &Template {
        &self.templates[&key]
    }

    pub fn replace(&mut self, key: TemplateKey, source: impl Into<String>) {
        self.templates.insert(key, Template::new(key.file_stem(), source));
    }

    pub fn render(&self, key: TemplateKey, vars: &Vars) -> Result<String, TemplateError> {
        self.get(key).render(vars)
    }

    /// SHA-256 of each template's text, hex encoded, keyed by file stem.
    pub fn checksums(&self) -> BTreeMap<String, String> {
        self.templates
            .iter()
            .map(|(k, t)| {
                let digest = Sha256::digest(t.source.as_bytes());
                (k.file_stem().to_string(), hex::encode(digest))
            })
            .collect()
    }
}

//! Run configuration: one TOML file listing the backend, shared settings
//! and the meetings to simulate.
//!
//! ```toml
//! output_dir = "out"
//! roster = "rosters/2018.toml"      # default for meetings without their own
//!
//! [backend]
//! kind = "scripted"                 # or "live", "echo"
//! [backend.http]                    # used when kind = "live"
//! model = "gpt-4o-mini"
//!
//! [settings]
//! turns_per_voter = 3
//!
//! [[meeting]]
//! date = "2018-05"
//! current_rate = "1.50"
//! seed = 5
//! materials = [{ kind = "beige_book", path = "materials/2018-05-beige.txt" }]
//! script = "scripts/2018-05.json"
//! ```
//!
//! Relative paths are resolved against the directory holding the config
//! file. Settings come from the file, then `FOMCSIM_*` environment
//! variables, then command-line flags, each overriding the one before.
//! The API key is only ever read from [`API_KEY_ENV`].

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendConfig, BackendError, ChatBackend, EchoBackend, LiveBackend, Script, ScriptedBackend, API_KEY_ENV};
use crate::engine::{MeetingConfig, MeetingSettings};
use crate::materials::{ingest, DocKind, MaterialsError, Stopwords};
use crate::persona::{load_roster, RosterError};
use crate::template::{TemplateError, TemplateSet};
use crate::units::{percent, MeetingDate, PolicyRate};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{what} {path} does not exist")]
    MissingPath { what: &'static str, path: String },
    #[error("config lists no meetings")]
    NoMeetings,
    #[error("meeting {0} is listed more than once")]
    DuplicateMeeting(MeetingDate),
    #[error("meeting {0} is not in the config")]
    UnknownMeeting(MeetingDate),
    #[error("meeting {0} has no roster (set `roster` on the meeting or at the top level)")]
    NoRoster(MeetingDate),
    #[error("meeting {0} has no script, required by the scripted backend")]
    NoScript(MeetingDate),
    #[error("bad value for {key}: {message}")]
    BadValue { key: String, message: String },
    #[error(transparent)]
    Roster(#[from] RosterError),
    #[error(transparent)]
    Materials(#[from] MaterialsError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Live,
    /// Diagnostic only: answers with the user turns it was sent.
    Echo,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scripted" => Ok(BackendKind::Scripted),
            "live" => Ok(BackendKind::Live),
            "echo" => Ok(BackendKind::Echo),
            other => Err(format!("unknown backend {other:?} (expected scripted, live or echo)")),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BackendSection {
    kind: BackendKind,
    http: BackendConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    kind: DocKind,
    path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeetingEntry {
    date: MeetingDate,
    #[serde(with = "percent")]
    current_rate: PolicyRate,
    seed: u64,
    roster: Option<PathBuf>,
    materials: Vec<MaterialEntry>,
    script: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    templates_dir: Option<PathBuf>,
    stopwords: Option<PathBuf>,
    roster: Option<PathBuf>,
    #[serde(default)]
    backend: BackendSection,
    #[serde(default)]
    settings: MeetingSettings,
    #[serde(rename = "meeting", default)]
    meetings: Vec<MeetingEntry>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One meeting to simulate, with resolved paths.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingSpec {
    pub date: MeetingDate,
    pub current_rate: PolicyRate,
    pub seed: u64,
    pub roster: PathBuf,
    pub materials: Vec<(DocKind, PathBuf)>,
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub templates_dir: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub backend: BackendKind,
    pub http: BackendConfig,
    pub settings: MeetingSettings,
    pub meetings: Vec<MeetingSpec>,
}

/// Command-line overrides; `None` leaves the configured value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub probe_enabled: Option<bool>,
    pub strict_probe: Option<bool>,
    pub turns_per_voter: Option<usize>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn must_exist(what: &'static str, p: PathBuf) -> Result<PathBuf, ConfigError> {
    if p.exists() {
        Ok(p)
    } else {
        Err(ConfigError::MissingPath { what, path: p.display().to_string() })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.display().to_string(), message },
            other => other,
        })
    }

    /// Parses config text whose relative paths are relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: "config".into(), message: e.to_string() })?;
        if raw.meetings.is_empty() {
            return Err(ConfigError::NoMeetings);
        }
        let default_roster = raw.roster.as_deref().map(|p| resolve(base, p));
        let mut meetings: Vec<MeetingSpec> = Vec::with_capacity(raw.meetings.len());
        for m in raw.meetings {
            if meetings.iter().any(|s| s.date == m.date) {
                return Err(ConfigError::DuplicateMeeting(m.date));
            }
            let roster = match (m.roster.as_deref().map(|p| resolve(base, p)), &default_roster) {
                (Some(p), _) => p,
                (None, Some(p)) => p.clone(),
                (None, None) => return Err(ConfigError::NoRoster(m.date)),
            };
            let materials = m
                .materials
                .into_iter()
                .map(|e| Ok((e.kind, must_exist("materials file", resolve(base, &e.path))?)))
                .collect::<Result<Vec<_>, ConfigError>>()?;
            meetings.push(MeetingSpec {
                date: m.date,
                current_rate: m.current_rate,
                seed: m.seed,
                roster: must_exist("roster", roster)?,
                materials,
                script: m.script.map(|p| must_exist("script", resolve(base, &p))).transpose()?,
            });
        }
        let config = RunConfig {
            output_dir: resolve(base, &raw.output_dir),
            templates_dir: raw.templates_dir.map(|p| must_exist("templates dir", resolve(base, &p))).transpose()?,
            stopwords: raw.stopwords.map(|p| must_exist("stopwords file", resolve(base, &p))).transpose()?,
            backend: raw.backend.kind,
            http: raw.backend.http,
            settings: raw.settings,
            meetings,
        };
        config.http.validate()?;
        Ok(config)
    }

    /// Applies `FOMCSIM_BACKEND`, `FOMCSIM_ENDPOINT`, `FOMCSIM_MODEL` and
    /// `FOMCSIM_OUTPUT_DIR` as returned by `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("FOMCSIM_BACKEND") {
            self.backend = v.parse().map_err(|message| ConfigError::BadValue { key: "FOMCSIM_BACKEND".into(), message })?;
        }
        if let Some(v) = var("FOMCSIM_ENDPOINT") {
            self.http.endpoint = v;
        }
        if let Some(v) = var("FOMCSIM_MODEL") {
            self.http.model = v;
        }
        if let Some(v) = var("FOMCSIM_OUTPUT_DIR") {
            self.output_dir = PathBuf::from(v);
        }
        self.http.validate()?;
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(b) = o.backend {
            self.backend = b;
        }
        if let Some(e) = &o.endpoint {
            self.http.endpoint = e.clone();
        }
        if let Some(m) = &o.model {
            self.http.model = m.clone();
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(d) = &o.templates_dir {
            self.templates_dir = Some(must_exist("templates dir", d.clone())?);
        }
        if let Some(seed) = o.seed {
            for m in &mut self.meetings {
                m.seed = seed;
            }
        }
        if let Some(p) = o.probe_enabled {
            self.settings.probe_enabled = p;
        }
        if let Some(s) = o.strict_probe {
            self.settings.strict_probe = s;
        }
        if let Some(t) = o.turns_per_voter {
            self.settings.turns_per_voter = t;
        }
        self.http.validate()?;
        Ok(())
    }

    pub fn meeting(&self, date: MeetingDate) -> Result<&MeetingSpec, ConfigError> {
        self.meetings.iter().find(|m| m.date == date).ok_or(ConfigError::UnknownMeeting(date))
    }

    /// Keeps only the meeting on `date`.
    pub fn select(&mut self, date: MeetingDate) -> Result<(), ConfigError> {
        let spec = self.meeting(date)?.clone();
        self.meetings = vec![spec];
        Ok(())
    }

    pub fn templates(&self) -> Result<TemplateSet, ConfigError> {
        Ok(match &self.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir)?,
            None => TemplateSet::builtin(),
        })
    }

    pub fn stopword_list(&self) -> Result<Stopwords, ConfigError> {
        match &self.stopwords {
            Some(p) => {
                Stopwords::load(p).map_err(|source| ConfigError::Io { path: p.display().to_string(), source })
            }
            None => Ok(Stopwords::default()),
        }
    }

    /// Loads the roster and documents for one meeting.
    pub fn meeting_config(&self, spec: &MeetingSpec, stopwords: &Stopwords) -> Result<MeetingConfig, ConfigError> {
        let roster = load_roster(&spec.roster)?;
        let materials = spec
            .materials
            .iter()
            .map(|(kind, path)| ingest(path, *kind, spec.date))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MeetingConfig {
            meeting_date: spec.date,
            current_rate: spec.current_rate,
            roster,
            materials,
            seed: spec.seed,
            settings: self.settings.clone(),
            stopwords: stopwords.clone(),
        })
    }

    /// Checks credentials now, so a live run fails before any session opens.
    pub fn backend_factory(&self) -> Result<BackendFactory, ConfigError> {
        match self.backend {
            BackendKind::Scripted => {
                if let Some(m) = self.meetings.iter().find(|m| m.script.is_none()) {
                    return Err(ConfigError::NoScript(m.date));
                }
                Ok(BackendFactory::Scripted)
            }
            BackendKind::Live => Ok(BackendFactory::Live(Arc::new(LiveBackend::from_env(self.http.clone())?))),
            BackendKind::Echo => Ok(BackendFactory::Echo),
        }
    }
}

/// Hands each meeting its backend: a fresh scripted backend per meeting,
/// or one live client shared by all.
#[derive(Clone)]
pub enum BackendFactory {
    Scripted,
    Live(Arc<LiveBackend>),
    Echo,
}

impl BackendFactory {
    pub fn for_meeting(&self, spec: &MeetingSpec) -> Result<Arc<dyn ChatBackend>, ConfigError> {
        match self {
            BackendFactory::Scripted => {
                let path = spec.script.as_ref().ok_or(ConfigError::NoScript(spec.date))?;
                Ok(Arc::new(ScriptedBackend::new(Script::load(path)?)))
            }
            BackendFactory::Live(b) => Ok(b.clone()),
            BackendFactory::Echo => Ok(Arc::new(EchoBackend)),
        }
    }

    pub fn uses_network(&self) -> bool {
        matches!(self, BackendFactory::Live(_))
    }
}

/// Name of the variable holding the API key, for messages.
pub fn credential_variable() -> &'static str {
    API_KEY_ENV
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (tempfile::TempDir, String) {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("roster.toml"), "").unwrap();
        fs::write(dir.path().join("bb.txt"), "== Boston ==\nText.").unwrap();
        fs::write(dir.path().join("s.json"), "{}").unwrap();
        let text = r#"
roster = "roster.toml"
[backend]
kind = "scripted"
[backend.http]
model = "file-model"
[settings]
turns_per_voter = 2
[[meeting]]
date = "2018-05"
current_rate = "1.50"
seed = 5
materials = [{ kind = "beige_book", path = "bb.txt" }]
script = "s.json"
"#
        .to_string();
        (dir, text)
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let (dir, text) = setup();
        let c = RunConfig::from_toml(&text, dir.path()).unwrap();
        let m = &c.meetings[0];
        assert_eq!(m.roster, dir.path().join("roster.toml"));
        assert_eq!(m.materials[0], (DocKind::BeigeBook, dir.path().join("bb.txt")));
        assert_eq!(m.current_rate, PolicyRate::from_bp(150).unwrap());
        assert_eq!(c.output_dir, dir.path().join("out"));
        assert_eq!(c.settings.turns_per_voter, 2);
        assert_eq!(c.settings.parse_retries, 2);
    }

    #[test]
    fn precedence_is_flags_then_env_then_file() {
        let (dir, text) = setup();
        let mut c = RunConfig::from_toml(&text, dir.path()).unwrap();
        assert_eq!(c.http.model, "file-model");
        c.apply_env(|k| (k == "FOMCSIM_MODEL").then(|| "env-model".to_string())).unwrap();
        assert_eq!(c.http.model, "env-model");
        c.apply_overrides(&Overrides { model: Some("flag-model".into()), seed: Some(7), ..Default::default() })
            .unwrap();
        assert_eq!(c.http.model, "flag-model");
        assert_eq!(c.meetings[0].seed, 7);
        assert!(c.apply_env(|k| (k == "FOMCSIM_BACKEND").then(|| "carrier-pigeon".to_string())).is_err());
    }

    #[test]
    fn load_time_errors() {
        let (dir, text) = setup();
        let missing = text.replace("bb.txt", "nope.txt");
        assert!(matches!(RunConfig::from_toml(&missing, dir.path()), Err(ConfigError::MissingPath { .. })));
        let teal_b = text.replace("beige_book", "tealbook_b");
        assert!(matches!(RunConfig::from_toml(&teal_b, dir.path()), Err(ConfigError::Parse { .. })));
        let key_in_file = text.replace("model = \"file-model\"", "api_key = \"sk-123\"");
        assert!(matches!(RunConfig::from_toml(&key_in_file, dir.path()), Err(ConfigError::Parse { .. })));
        let no_meetings = "roster = \"roster.toml\"\n";
        assert!(matches!(RunConfig::from_toml(no_meetings, dir.path()), Err(ConfigError::NoMeetings)));
        let too_many_retries = text.replace("model = \"file-model\"", "max_retries = 11");
        assert!(matches!(RunConfig::from_toml(&too_many_retries, dir.path()), Err(ConfigError::Backend(_))));
        let dup = format!("{text}\n{}", &text[text.find("[[meeting]]").unwrap()..]);
        assert!(matches!(RunConfig::from_toml(&dup, dir.path()), Err(ConfigError::DuplicateMeeting(_))));
    }

    #[test]
    fn scripted_backend_needs_scripts() {
        let (dir, text) = setup();
        let c = RunConfig::from_toml(&text.replace("script = \"s.json\"", ""), dir.path()).unwrap();
        assert!(matches!(c.backend_factory(), Err(ConfigError::NoScript(_))));
    }
}

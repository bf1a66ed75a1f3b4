//! Meeting documents and the session procedures built on them: reading,
//! memory cleanse and comprehension checks.
//!
//! Material files are plain text split into sections by delimiter lines of
//! the form `== <label> ==`. Section bodies are whitespace-normalized: runs of
//! spaces and single newlines collapse to one space, blank lines separate
//! paragraphs.

mod chunk;
mod probe;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, Session};
use crate::events::{EventLog, Stage};
use crate::template::{TemplateError, TemplateKey, TemplateSet, Vars};
use crate::units::MeetingDate;

pub use chunk::chunk_document;
pub use probe::{
    comprehension_probe, contamination_probe, score_probe, ContaminationReport, ProbeOptions, ProbeResult,
    Stopwords,
};

#[derive(Debug, Error)]
pub enum MaterialsError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no sections found (expected delimiter lines like `== Cleveland ==`)")]
    NoSections,
    #[error("duplicate section label {0:?}")]
    DuplicateSection(String),
    #[error("section {0:?} has no text")]
    EmptySection(String),
    #[error("TealBook B is not accepted as meeting material")]
    ExcludedKind,
    #[error("unknown material kind {0:?} (expected beige_book or tealbook_a)")]
    UnknownKind(String),
    #[error("max_chunk must be positive")]
    ZeroChunk,
    #[error("{agent} did not acknowledge part {part} of the {document} after {attempts} attempt(s)")]
    NotAcknowledged { agent: String, document: DocKind, part: usize, attempts: u32 },
    #[error("memory cleanse for {0} must be the first prompt after the persona")]
    CleanseOrder(String),
    #[error("document has no section named {0:?}")]
    UnknownSection(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DocKind {
    BeigeBook,
    TealBookA,
}

impl DocKind {
    pub fn title(self) -> &'static str {
        match self {
            DocKind::BeigeBook => "Beige Book",
            DocKind::TealBookA => "TealBook A",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            DocKind::BeigeBook => "beige_book",
            DocKind::TealBookA => "tealbook_a",
        }
    }
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

impl FromStr for DocKind {
    type Err = MaterialsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "beigebook" => Ok(DocKind::BeigeBook),
            "tealbooka" => Ok(DocKind::TealBookA),
            "tealbookb" => Err(MaterialsError::ExcludedKind),
            _ => Err(MaterialsError::UnknownKind(s.to_string())),
        }
    }
}

impl TryFrom<String> for DocKind {
    type Error = MaterialsError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DocKind> for String {
    fn from(k: DocKind) -> String {
        k.key().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub label: String,
    pub body: String,
}

impl Section {
    /// The section as it appears in the document body: delimiter line, text, newline.
    pub fn rendered(&self) -> String {
        format!("== {} ==\n{}\n", self.label, self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialDoc {
    pub kind: DocKind,
    pub meeting_date: MeetingDate,
    sections: Vec<Section>,
}

impl MaterialDoc {
    pub fn new(kind: DocKind, meeting_date: MeetingDate, sections: Vec<Section>) -> Result<Self, MaterialsError> {
        if sections.is_empty() {
            return Err(MaterialsError::NoSections);
        }
        let mut seen = std::collections::HashSet::new();
        for s in &sections {
            if !seen.insert(s.label.as_str()) {
                return Err(MaterialsError::DuplicateSection(s.label.clone()));
            }
            if s.body.trim().is_empty() {
                return Err(MaterialsError::EmptySection(s.label.clone()));
            }
        }
        Ok(Self { kind, meeting_date, sections })
    }

    /// Parses the delimiter format.
    pub fn parse(text: &str, kind: DocKind, meeting_date: MeetingDate) -> Result<Self, MaterialsError> {
        let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
        let mut preamble = false;
        for line in text.lines() {
            if let Some(label) = delimiter_label(line) {
                sections.push((label.to_string(), Vec::new()));
            } else if let Some((_, lines)) = sections.last_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                preamble = true;
            }
        }
        if preamble {
            warn!("{kind} {meeting_date}: ignoring text before the first section delimiter");
        }
        let sections = sections
            .into_iter()
            .map(|(label, lines)| Section { label, body: normalize_body(&lines) })
            .collect();
        Self::new(kind, meeting_date, sections)
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, label: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.label == label)
    }

    /// Full body as sent to agents: every section, rendered, concatenated.
    pub fn body(&self) -> String {
        self.sections.iter().map(Section::rendered).collect()
    }
}

fn delimiter_label(line: &str) -> Option<&str> {
    let t = line.trim();
    let inner = t.strip_prefix("==")?.strip_suffix("==")?.trim();
    if inner.is_empty() || inner.contains("==") {
        None
    } else {
        Some(inner)
    }
}

fn normalize_body(lines: &[&str]) -> String {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.extend(line.split_whitespace());
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join(" "));
    }
    paragraphs.join("\n\n")
}

pub fn ingest(path: &Path, kind: DocKind, meeting_date: MeetingDate) -> Result<MaterialDoc, MaterialsError> {
    let text = fs::read_to_string(path)
        .map_err(|source| MaterialsError::Io { path: path.display().to_string(), source })?;
    MaterialDoc::parse(&text, kind, meeting_date)
}

/// Reading options for [`feed_materials`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedOptions {
    /// Character budget per chunk payload.
    pub max_chunk: usize,
    /// Extra sends of a chunk whose reply lacks the acknowledgement.
    pub ack_retries: u32,
}

impl Default for FeedOptions {
    fn default() -> Self {
        Self { max_chunk: 12_000, ack_retries: 2 }
    }
}

const ACK_WORD: &str = "completed";

/// Sends the document in chunks, each framed by the materials-learning
/// prompt, waiting for "Completed" before the next one. Returns the number
/// of chunks.
pub fn feed_materials(
    session: &mut Session,
    backend: &dyn ChatBackend,
    doc: &MaterialDoc,
    options: FeedOptions,
    templates: &TemplateSet,
    log: &mut EventLog,
) -> Result<usize, MaterialsError> {
    let chunks = chunk_document(doc, options.max_chunk)?;
    let parts = chunks.len();
    for (i, payload) in chunks.iter().enumerate() {
        let vars = Vars::new()
            .with("document", doc.kind.title())
            .with("part", (i + 1).to_string())
            .with("parts", parts.to_string())
            .with("meeting_date", doc.meeting_date.long_name());
        let framing = templates.render(TemplateKey::MaterialsLearning, &vars)?;
        let message = format!("{framing}\n\n{payload}");
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let reply = session.send(backend, &message)?;
            let acked = reply.to_ascii_lowercase().contains(ACK_WORD);
            let agent = session.agent_name().to_string();
            log.record(Stage::Materials, &agent, reply).retry = !acked;
            if acked {
                break;
            }
            if attempts > options.ack_retries {
                return Err(MaterialsError::NotAcknowledged {
                    agent,
                    document: doc.kind,
                    part: i + 1,
                    attempts,
                });
            }
            warn!("{agent} did not acknowledge {} part {}; resending", doc.kind, i + 1);
        }
    }
    Ok(parts)
}

/// Instructs the agent to disregard what it may already know about this meeting.
/// Must be the first prompt the session receives.
pub fn cleanse_memory(
    session: &mut Session,
    backend: &dyn ChatBackend,
    meeting_date: MeetingDate,
    templates: &TemplateSet,
    log: &mut EventLog,
) -> Result<(), MaterialsError> {
    if session.turns() > 0 {
        return Err(MaterialsError::CleanseOrder(session.agent_name().to_string()));
    }
    let prompt = templates.render(
        TemplateKey::Cleanse,
        &Vars::new().with("meeting_date", meeting_date.long_name()),
    )?;
    let reply = session.send(backend, &prompt)?;
    let agent = session.agent_name().to_string();
    log.record(Stage::Cleanse, &agent, reply);
    Ok(())
}

//! Runs every meeting in a [`RunConfig`] and writes the results.
//!
//! Meetings are independent: each gets its own backend sessions, RNG and
//! transcript, and a failure in one does not stop the others. With the
//! `parallel` feature, meetings run on a rayon pool of the requested size;
//! results keep config order either way.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{error, info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{BackendFactory, BackendKind, ConfigError, MeetingSpec, RunConfig};
use crate::engine::{run_meeting, AltLabel};
use crate::events::Stage;
use crate::materials::Stopwords;
use crate::template::TemplateSet;
use crate::transcript::{render_replay, TranscriptFile};
use crate::units::{percent, MeetingDate, PolicyRate};

pub const SUMMARY_FILE: &str = "campaign.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MeetingStatus {
    Completed {
        decision: String,
        #[serde(with = "percent")]
        decided_rate: PolicyRate,
        counts: BTreeMap<AltLabel, u32>,
    },
    Failed {
        /// `None` when the meeting failed before any stage began.
        stage: Option<Stage>,
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingSummary {
    pub date: MeetingDate,
    pub seed: u64,
    #[serde(flatten)]
    pub status: MeetingStatus,
    /// Transcript file name inside the output directory, if one was written.
    pub transcript: Option<String>,
    pub tokens: u64,
}

impl MeetingSummary {
    pub fn is_completed(&self) -> bool {
        matches!(self.status, MeetingStatus::Completed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub backend: BackendKind,
    pub model: String,
    pub threads: usize,
    pub meetings: Vec<MeetingSummary>,
}

impl CampaignSummary {
    pub fn failures(&self) -> usize {
        self.meetings.iter().filter(|m| !m.is_completed()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

/// Everything a meeting needs that is shared across the campaign.
struct Shared<'a> {
    config: &'a RunConfig,
    factory: BackendFactory,
    templates: TemplateSet,
    stopwords: Stopwords,
    model: String,
    out_dir: &'a Path,
}

/// Model name stored in transcripts.
pub fn model_name(config: &RunConfig) -> String {
    match config.backend {
        BackendKind::Scripted => "scripted".to_string(),
        BackendKind::Live => config.http.model.clone(),
        BackendKind::Echo => "echo".to_string(),
    }
}

/// Runs all meetings with up to `threads` in flight and writes
/// `<date>.json`, `<date>.log` and the campaign summary to the output
/// directory. Only setup problems (templates, credentials, output
/// directory) are errors; meeting failures are reported in the summary.
pub fn run_campaign(config: &RunConfig, threads: usize) -> Result<CampaignSummary, ConfigError> {
    let shared = Shared {
        config,
        factory: config.backend_factory()?,
        templates: config.templates()?,
        stopwords: config.stopword_list()?,
        model: model_name(config),
        out_dir: &config.output_dir,
    };
    fs::create_dir_all(&config.output_dir)
        .map_err(|source| ConfigError::Io { path: config.output_dir.display().to_string(), source })?;
    let threads = threads.max(1);
    info!("running {} meeting(s) on {} thread(s)", config.meetings.len(), threads);
    let meetings = map_meetings(&config.meetings, threads, |spec| run_one(&shared, spec));
    let summary = CampaignSummary { backend: config.backend, model: shared.model.clone(), threads, meetings };
    let path = config.output_dir.join(SUMMARY_FILE);
    fs::write(&path, summary.to_json()).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    Ok(summary)
}

#[cfg(feature = "parallel")]
fn map_meetings<T, F>(specs: &[MeetingSpec], threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&MeetingSpec) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if threads <= 1 {
        return specs.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| specs.par_iter().map(&f).collect()),
        Err(e) => {
            warn!("cannot start thread pool ({e}); running sequentially");
            specs.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn map_meetings<T, F>(specs: &[MeetingSpec], threads: usize, f: F) -> Vec<T>
where
    F: Fn(&MeetingSpec) -> T,
{
    if threads > 1 {
        warn!("built without the parallel feature; running {} meetings sequentially", specs.len());
    }
    specs.iter().map(f).collect()
}

fn run_one(shared: &Shared<'_>, spec: &MeetingSpec) -> MeetingSummary {
    let failed = |error: String| MeetingSummary {
        date: spec.date,
        seed: spec.seed,
        status: MeetingStatus::Failed { stage: None, error },
        transcript: None,
        tokens: 0,
    };
    let meeting = match shared.config.meeting_config(spec, &shared.stopwords) {
        Ok(m) => m,
        Err(e) => {
            error!("meeting {}: {e}", spec.date);
            return failed(e.to_string());
        }
    };
    let backend = match shared.factory.for_meeting(spec) {
        Ok(b) => b,
        Err(e) => {
            error!("meeting {}: {e}", spec.date);
            return failed(e.to_string());
        }
    };
    let checksums = shared.templates.checksums();
    let (file, status) = match run_meeting(&meeting, backend.as_ref(), &shared.templates) {
        Ok(outcome) => {
            let status = MeetingStatus::Completed {
                decision: outcome.decision_line(),
                decided_rate: outcome.decided_rate,
                counts: outcome.tally.counts.clone(),
            };
            (TranscriptFile::completed(outcome, &shared.model, checksums), status)
        }
        Err(e) => {
            error!("{e}");
            let status = MeetingStatus::Failed { stage: e.stage, error: e.source.to_string() };
            (TranscriptFile::failed(&e, spec.seed, &shared.model, checksums), status)
        }
    };
    let tokens = file.token_usage.total();
    let transcript = match write_outputs(shared.out_dir, &file) {
        Ok(name) => Some(name),
        Err(e) => {
            error!("meeting {}: {e}", spec.date);
            return failed(e.to_string());
        }
    };
    MeetingSummary { date: spec.date, seed: spec.seed, status, transcript, tokens }
}

/// Writes the canonical transcript and its text replay; returns the
/// transcript file name.
pub fn write_outputs(dir: &Path, file: &TranscriptFile) -> Result<String, ConfigError> {
    let name = file.file_name();
    let path = dir.join(&name);
    file.write(&path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let log_path = log_path(dir, file.meeting_date);
    fs::write(&log_path, render_replay(file))
        .map_err(|source| ConfigError::Io { path: log_path.display().to_string(), source })?;
    Ok(name)
}

pub fn log_path(dir: &Path, date: MeetingDate) -> PathBuf {
    dir.join(format!("{date}.log"))
}

/// Reads every `*.json` transcript in `dir` except the campaign summary,
/// sorted by meeting date.
pub fn read_transcripts(dir: &Path) -> Result<Vec<(PathBuf, TranscriptFile)>, ConfigError> {
    let entries =
        fs::read_dir(dir).map_err(|source| ConfigError::Io { path: dir.display().to_string(), source })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| ConfigError::Io { path: dir.display().to_string(), source })?.path();
        let is_json = path.extension().is_some_and(|e| e == "json");
        if !is_json || path.file_name().is_some_and(|n| n == SUMMARY_FILE) {
            continue;
        }
        let file = TranscriptFile::read(&path)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        files.push((path, file));
    }
    files.sort_by_key(|(_, f)| f.meeting_date);
    Ok(files)
}

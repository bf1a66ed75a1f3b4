//! Subcommand bodies. Each returns a [`Failure`] that fixes the exit code.

use std::fs;
use std::path::Path;

use anyhow::anyhow;
use fomcsim_core::campaign::{log_path, read_transcripts, run_campaign, MeetingStatus, MeetingSummary};
use fomcsim_core::config::{ConfigError, Overrides, RunConfig};
use fomcsim_core::engine::probe_agents;
use fomcsim_core::evaluation::{build_report, GroundTruth, SimulationRecord};
use fomcsim_core::materials::{contamination_probe, DocKind};
use fomcsim_core::transcript::{render_replay, TranscriptFile};
use fomcsim_core::units::MeetingDate;
use log::warn;

use crate::Failure;

fn config_error(e: ConfigError) -> Failure {
    Failure::Config(e.into())
}

/// File, then environment, then flags.
fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::load(path).map_err(config_error)?;
    config.apply_env(|k| std::env::var(k).ok()).map_err(config_error)?;
    config.apply_overrides(overrides).map_err(config_error)?;
    Ok(config)
}

fn status_line(m: &MeetingSummary) -> String {
    match &m.status {
        MeetingStatus::Completed { decision, .. } => decision.clone(),
        MeetingStatus::Failed { stage: Some(stage), error } => format!("FAILED during {stage}: {error}"),
        MeetingStatus::Failed { stage: None, error } => format!("FAILED: {error}"),
    }
}

pub fn run(config_path: &Path, date: MeetingDate, overrides: &Overrides) -> Result<(), Failure> {
    let mut config = load_config(config_path, overrides)?;
    config.select(date).map_err(config_error)?;
    let summary = run_campaign(&config, 1).map_err(config_error)?;
    let m = &summary.meetings[0];
    if let Some(name) = &m.transcript {
        println!("Transcript: {}", config.output_dir.join(name).display());
        println!("Log: {}", log_path(&config.output_dir, m.date).display());
    }
    match &m.status {
        MeetingStatus::Completed { decision, .. } => {
            println!("{decision}");
            Ok(())
        }
        MeetingStatus::Failed { .. } => Err(Failure::Stage(anyhow!(status_line(m)))),
    }
}

pub fn campaign(config_path: &Path, parallel: usize, overrides: &Overrides) -> Result<(), Failure> {
    let config = load_config(config_path, overrides)?;
    let summary = run_campaign(&config, parallel).map_err(config_error)?;
    for m in &summary.meetings {
        println!("{}  {}", m.date, status_line(m));
    }
    println!("Summary: {}", config.output_dir.join(fomcsim_core::campaign::SUMMARY_FILE).display());
    match summary.failures() {
        0 => Ok(()),
        n => Err(Failure::Stage(anyhow!("{n} of {} meetings failed", summary.meetings.len()))),
    }
}

pub fn evaluate(dir: &Path, ground_truth: &Path, json: bool, output: Option<&Path>) -> Result<(), Failure> {
    let truth = GroundTruth::load(ground_truth).map_err(|e| Failure::Evaluation(e.into()))?;
    let files = read_transcripts(dir).map_err(|e| Failure::Evaluation(e.into()))?;
    if files.is_empty() {
        return Err(Failure::Evaluation(anyhow!("no transcripts in {}", dir.display())));
    }
    let (sims, failed) =
        SimulationRecord::from_transcripts(files.iter().map(|(_, f)| f)).map_err(|e| Failure::Evaluation(e.into()))?;
    for d in failed {
        warn!("meeting {d} did not complete; excluded from evaluation");
    }
    let report = build_report(&sims, &truth).map_err(|e| Failure::Evaluation(e.into()))?;
    let text = if json { report.to_json() } else { report.render_text() };
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(anyhow!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn probe(
    config_path: &Path,
    date: MeetingDate,
    contamination: bool,
    district: &str,
    overrides: &Overrides,
) -> Result<(), Failure> {
    let config = load_config(config_path, overrides)?;
    let spec = config.meeting(date).map_err(config_error)?;
    let factory = config.backend_factory().map_err(config_error)?;
    let templates = config.templates().map_err(config_error)?;
    let stopwords = config.stopword_list().map_err(config_error)?;
    let meeting = config.meeting_config(spec, &stopwords).map_err(config_error)?;
    let backend = factory.for_meeting(spec).map_err(config_error)?;

    if contamination {
        let beige = meeting.materials.iter().find(|d| d.kind == DocKind::BeigeBook);
        let report = contamination_probe(backend.as_ref(), beige, district, date, &templates)
            .map_err(|e| Failure::Stage(e.into()))?;
        println!("== Question ==\n{}\n", report.question);
        println!("== Model response ==\n{}\n", report.response);
        match report.reference {
            Some(r) => println!("== Reference excerpt ({district}) ==\n{r}"),
            None => println!("== Reference excerpt ({district}) ==\n(no {district} section in the Beige Book)"),
        }
        return Ok(());
    }

    let probes = probe_agents(&meeting, backend.as_ref(), &templates).map_err(|e| Failure::Config(e.into()))?;
    let width = probes.iter().map(|p| p.agent.chars().count()).max().unwrap_or(5);
    let mut failed = 0;
    let mut errors = 0;
    for p in &probes {
        match &p.result {
            Ok(r) => {
                let verdict = if r.passed { "pass" } else { "FAIL" };
                failed += usize::from(!r.passed);
                println!(
                    "{:<width$}  {:<14}  score {:.2}  attempts {}  {verdict}",
                    p.agent, r.district, r.score, r.attempts
                );
            }
            Err(e) => {
                errors += 1;
                println!("{:<width$}  error: {e}", p.agent);
            }
        }
    }
    if errors > 0 {
        return Err(Failure::Stage(anyhow!("{errors} agent(s) could not be probed")));
    }
    if failed > 0 && config.settings.strict_probe {
        return Err(Failure::Stage(anyhow!("{failed} agent(s) failed the probe (strict mode)")));
    }
    Ok(())
}

pub fn replay(path: &Path, canonical: bool) -> Result<(), Failure> {
    let file = TranscriptFile::read(path).map_err(|e| Failure::Config(anyhow!("{}: {e}", path.display())))?;
    if canonical {
        print!("{}", file.to_canonical_json());
    } else {
        print!("{}", render_replay(&file));
    }
    Ok(())
}

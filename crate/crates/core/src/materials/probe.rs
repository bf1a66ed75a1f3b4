//! Comprehension and contamination probes.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{DocKind, MaterialDoc, MaterialsError};
use crate::backend::{open_session, ChatBackend, Session};
use crate::events::{EventLog, Stage};
use crate::rng::MeetingRng;
use crate::template::{TemplateKey, TemplateSet, Vars};
use crate::units::MeetingDate;

const BUNDLED_STOPWORDS: &str = include_str!("../../stopwords.txt");

/// Words ignored when comparing a probe answer with the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }
}

impl Stopwords {
    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    /// Distinct lower-cased alphanumeric tokens that are not stopwords.
    pub fn content_tokens(&self, text: &str) -> HashSet<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| !self.contains(t))
            .collect()
    }
}

/// Fraction of the reference's distinct content tokens that occur in the response.
pub fn score_probe(response: &str, reference: &str, stopwords: &Stopwords) -> f64 {
    let wanted = stopwords.content_tokens(reference);
    if wanted.is_empty() {
        return 0.0;
    }
    let have = stopwords.content_tokens(response);
    let hits = wanted.iter().filter(|t| have.contains(*t)).count();
    hits as f64 / wanted.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub threshold: f64,
    pub max_retries: u32,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { threshold: 0.3, max_retries: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub agent: String,
    pub district: String,
    pub question: String,
    pub response: String,
    pub score: f64,
    /// Probe prompts sent, including the first: `1..=1 + max_retries`.
    pub attempts: u32,
    pub passed: bool,
}

/// Asks about a randomly chosen section and scores the answer against it,
/// asking the agent to re-read and answer again on failure. A final failure
/// is returned as `passed == false`, not as an error.
#[allow(clippy::too_many_arguments)]
pub fn comprehension_probe(
    session: &mut Session,
    backend: &dyn ChatBackend,
    doc: &MaterialDoc,
    rng: &mut MeetingRng,
    options: ProbeOptions,
    stopwords: &Stopwords,
    templates: &TemplateSet,
    log: &mut EventLog,
) -> Result<ProbeResult, MaterialsError> {
    let section = &doc.sections()[rng.below(doc.sections().len())];
    let vars = Vars::new().with("district", section.label.clone());
    let question = templates.render(TemplateKey::Probe, &vars)?;
    let agent = session.agent_name().to_string();
    let mut attempts = 0;
    let mut prompt = question.clone();
    loop {
        attempts += 1;
        let response = session.send(backend, &prompt)?;
        let score = score_probe(&response, &section.body, stopwords);
        let passed = score >= options.threshold;
        log.record(Stage::Probe, &agent, response.clone()).retry = !passed && attempts <= options.max_retries;
        if passed || attempts > options.max_retries {
            if passed {
                info!("{agent}: probe on {} passed with score {score:.2}", section.label);
            } else {
                warn!("{agent}: probe on {} failed after {attempts} attempt(s), score {score:.2}", section.label);
            }
            return Ok(ProbeResult {
                agent,
                district: section.label.clone(),
                question,
                response,
                score,
                attempts,
                passed,
            });
        }
        prompt = templates.render(TemplateKey::ProbeRetry, &vars)?;
    }
}

/// Output of the training-contamination diagnostic, for side-by-side reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub question: String,
    pub response: String,
    pub reference: Option<String>,
}

const NEUTRAL_SYSTEM_PROMPT: &str = "You are a helpful assistant.";

/// Asks a fresh, un-briefed session a detailed question about the Beige Book
/// so a person can judge whether the model already knows the document.
pub fn contamination_probe(
    backend: &dyn ChatBackend,
    beige_book: Option<&MaterialDoc>,
    district: &str,
    meeting_date: MeetingDate,
    templates: &TemplateSet,
) -> Result<ContaminationReport, MaterialsError> {
    if let Some(doc) = beige_book {
        debug_assert_eq!(doc.kind, DocKind::BeigeBook);
    }
    let period = format!("{} and {}", meeting_date.previous_month().month_name(), meeting_date.long_name());
    let question = templates.render(
        TemplateKey::Contamination,
        &Vars::new().with("district", district).with("period", period),
    )?;
    let mut session = open_session("contamination-probe", NEUTRAL_SYSTEM_PROMPT)?;
    let response = session.send(backend, &question)?;
    let reference = beige_book.and_then(|d| d.section(district)).map(|s| s.body.clone());
    Ok(ContaminationReport { question, response, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Script, ScriptedBackend};
    use crate::materials::tests::{beige_book_text, date};

    fn cleveland_doc() -> MaterialDoc {
        MaterialDoc::parse(&beige_book_text(), DocKind::BeigeBook, date("2018-09")).unwrap()
    }

    #[test]
    fn identity_and_disjoint_scores() {
        let sw = Stopwords::default();
        let text = "Manufacturers in Cleveland reported rising steel prices.";
        assert_eq!(score_probe(text, text, &sw), 1.0);
        assert_eq!(score_probe("bananas kiwis", text, &sw), 0.0);
        assert_eq!(score_probe("", text, &sw), 0.0);
        assert_eq!(score_probe("anything", "the and of", &sw), 0.0);
    }

    /// Independent recount: explicit token lists and a nested-loop intersection.
    fn brute_force_recall(response_tokens: &[&str], reference_tokens: &[&str]) -> f64 {
        let mut distinct: Vec<&str> = Vec::new();
        for t in reference_tokens {
            if !distinct.contains(t) {
                distinct.push(t);
            }
        }
        let mut hits = 0;
        for r in &distinct {
            if response_tokens.iter().any(|t| t == r) {
                hits += 1;
            }
        }
        hits as f64 / distinct.len() as f64
    }

    #[test]
    fn six_of_ten_content_tokens() {
        let reference_tokens =
            ["steel", "prices", "rose", "manufacturers", "hiring", "wages", "trucks", "demand", "credit", "housing"];
        let reference = format!("The {}, and the {}!", reference_tokens[..5].join(" "), reference_tokens[5..].join(", "));
        let response_tokens = ["Steel", "prices", "rose;", "Manufacturers", "HIRING", "wages", "unrelated"];
        let response = format!("In short: {}.", response_tokens.join(" "));
        let oracle = brute_force_recall(
            &["steel", "prices", "rose", "manufacturers", "hiring", "wages", "unrelated"],
            &reference_tokens,
        );
        assert_eq!(oracle, 0.6);
        assert_eq!(score_probe(&response, &reference, &Stopwords::default()), oracle);
    }

    #[test]
    fn stopword_file_parsing() {
        let sw = Stopwords::parse("# comment\nThe\n\n  of \n");
        assert!(sw.contains("the") && sw.contains("of"));
        assert!(!sw.contains("# comment"));
    }

    #[test]
    fn verbatim_answer_passes_first_time() {
        let doc = cleveland_doc();
        let mut rng = MeetingRng::from_seed(3);
        let idx = MeetingRng::from_seed(3).below(12);
        let body = doc.sections()[idx].body.clone();
        let backend = ScriptedBackend::new(Script::default().with_reply("a", 1, body));
        let mut s = open_session("a", "sys").unwrap();
        let mut log = EventLog::new();
        let r = comprehension_probe(
            &mut s,
            &backend,
            &doc,
            &mut rng,
            ProbeOptions::default(),
            &Stopwords::default(),
            &TemplateSet::builtin(),
            &mut log,
        )
        .unwrap();
        assert!(r.passed);
        assert_eq!(r.score, 1.0);
        assert_eq!(r.attempts, 1);
        assert_eq!(r.district, doc.sections()[idx].label);
        assert!(r.question.ends_with(&format!("in the region of {}?", r.district)));
    }

    #[test]
    fn unrelated_answers_fail_after_retries() {
        let doc = cleveland_doc();
        let backend = ScriptedBackend::new(Script::default().default_reply("I like turtles."));
        let mut s = open_session("a", "sys").unwrap();
        let mut log = EventLog::new();
        let opts = ProbeOptions { threshold: 0.3, max_retries: 3 };
        let r = comprehension_probe(
            &mut s,
            &backend,
            &doc,
            &mut MeetingRng::from_seed(9),
            opts,
            &Stopwords::default(),
            &TemplateSet::builtin(),
            &mut log,
        )
        .unwrap();
        assert!(!r.passed);
        assert_eq!(r.score, 0.0);
        assert_eq!(r.attempts, 4);
        assert_eq!(s.turns(), 4);
        assert!(s.history()[3].content.contains("review the materials again"));
        assert_eq!(log.count(Stage::Probe), 4);
    }

    #[test]
    fn district_choice_is_seed_deterministic() {
        let doc = cleveland_doc();
        let run = |seed| {
            let backend = ScriptedBackend::new(Script::default().default_reply("economy"));
            let mut s = open_session("a", "sys").unwrap();
            comprehension_probe(
                &mut s,
                &backend,
                &doc,
                &mut MeetingRng::from_seed(seed),
                ProbeOptions { threshold: 0.0, max_retries: 0 },
                &Stopwords::default(),
                &TemplateSet::builtin(),
                &mut EventLog::new(),
            )
            .unwrap()
            .district
        };
        for seed in 0..20 {
            assert_eq!(run(seed), run(seed));
        }
        let distinct: HashSet<_> = (0..50).map(run).collect();
        assert!(distinct.len() > 6);
    }

    #[test]
    fn contamination_question_and_reference() {
        let doc = cleveland_doc();
        let backend = ScriptedBackend::new(Script::default().default_reply("SUVs sold well."));
        let report =
            contamination_probe(&backend, Some(&doc), "Cleveland", date("2018-09"), &TemplateSet::builtin()).unwrap();
        assert_eq!(
            report.question,
            "How did automobile dealers in the Cleveland area describe the demand for the automotive market and its underlying reasons during August and September 2018?"
        );
        assert_eq!(report.response, "SUVs sold well.");
        assert!(report.reference.unwrap().contains("Auto dealers in Cleveland"));
    }

    proptest::proptest! {
        #[test]
        fn score_bounds(a in "[a-zA-Z ,.]{0,80}", b in "[a-zA-Z ,.]{1,80}") {
            let sw = Stopwords::default();
            let s = score_probe(&a, &b, &sw);
            proptest::prop_assert!((0.0..=1.0).contains(&s));
            if !sw.content_tokens(&b).is_empty() {
                proptest::prop_assert_eq!(score_probe(&b, &b, &sw), 1.0);
            }
        }
    }
}

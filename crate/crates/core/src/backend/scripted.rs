//! Deterministic backend that replays canned replies.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRole, Completion, CompletionRequest, TokenUsage};

/// Replies keyed by agent name and 1-based user-turn ordinal within that
/// agent's session.
///
/// On disk this is JSON:
/// `{"default_reply": "Completed", "replies": {"J. Powell": {"4": "... STANCE: INCREASE"}}}`
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_reply: Option<String>,
    #[serde(default)]
    pub replies: BTreeMap<String, BTreeMap<usize, String>>,
}

impl Script {
    pub fn with_reply(mut self, agent: &str, turn: usize, reply: impl Into<String>) -> Self {
        self.insert(agent, turn, reply);
        self
    }

    pub fn default_reply(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = Some(reply.into());
        self
    }

    pub fn insert(&mut self, agent: &str, turn: usize, reply: impl Into<String>) {
        self.replies.entry(agent.to_string()).or_default().insert(turn, reply.into());
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let script: Script =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("bad script: {e}")))?;
        if script.replies.values().any(|turns| turns.contains_key(&0)) {
            return Err(BackendError::Config("script turn ordinals start at 1".into()));
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A reply that was handed out, for post-run assertions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScriptKey {
    pub agent: String,
    pub turn: usize,
    /// True when the default reply was used because no scripted entry existed.
    pub defaulted: bool,
}

#[derive(Debug)]
pub struct ScriptedBackend {
    script: Script,
    model: String,
    consumed: Mutex<Vec<ScriptKey>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script, model: "scripted".to_string(), consumed: Mutex::new(Vec::new()) }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }

    /// Every key consumed so far, in call order.
    pub fn consumed(&self) -> Vec<ScriptKey> {
        self.consumed.lock().expect("poisoned").clone()
    }
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let turn = request.ordinal();
        let scripted = self.script.replies.get(request.agent_name).and_then(|t| t.get(&turn));
        let (content, defaulted) = match (scripted, &self.script.default_reply) {
            (Some(reply), _) => (reply.clone(), false),
            (None, Some(default)) => (default.clone(), true),
            (None, None) => {
                return Err(BackendError::ScriptExhausted {
                    agent: request.agent_name.to_string(),
                    session: request.session_id,
                    turn,
                })
            }
        };
        self.consumed.lock().expect("poisoned").push(ScriptKey {
            agent: request.agent_name.to_string(),
            turn,
            defaulted,
        });
        // Word counts stand in for provider token usage so reports stay deterministic.
        let usage = TokenUsage {
            prompt_tokens: request.messages.iter().map(|m| word_count(&m.content)).sum(),
            completion_tokens: word_count(&content),
        };
        Ok(Completion { content, usage })
    }

    fn model(&self) -> &str {
        &self.model
    }
}

/// Diagnostic backend that answers with every user message it has seen so
/// far, joined by blank lines. An agent on this backend "remembers" the
/// materials verbatim, which makes it a reference point for probe scores.
#[derive(Debug, Default)]
pub struct EchoBackend;

impl ChatBackend for EchoBackend {
    fn complete(&self, request: CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let content = request
            .messages
            .iter()
            .filter(|m| m.role == ChatRole::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n");
        let usage = TokenUsage {
            prompt_tokens: request.messages.iter().map(|m| word_count(&m.content)).sum(),
            completion_tokens: word_count(&content),
        };
        Ok(Completion { content, usage })
    }

    fn model(&self) -> &str {
        "echo"
    }
}

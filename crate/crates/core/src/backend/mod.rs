//! Chat-completion providers and per-agent sessions.
//!
//! A [`ChatBackend`] turns a full message history into one assistant reply.
//! It holds no conversation state: each [`Session`] owns its history and
//! resends it in full on every call, so any OpenAI-compatible server works
//! and every exchange can be audited after the fact.

mod live;
mod scripted;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use live::{BackendConfig, LiveBackend, RetryRecord, API_KEY_ENV};
pub use scripted::{EchoBackend, Script, ScriptKey, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: ChatRole::Assistant, content: content.into() }
    }
}

/// Prompt/completion token counts as reported by the provider.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    pub usage: TokenUsage,
}

/// What a backend sees for one call.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub session_id: SessionId,
    pub agent_name: &'a str,
    pub messages: &'a [ChatMessage],
}

impl CompletionRequest<'_> {
    /// 1-based index of the current user turn within the session.
    pub fn ordinal(&self) -> usize {
        self.messages.iter().filter(|m| m.role == ChatRole::User).count()
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("prompt for {agent:?} is empty")]
    EmptyPrompt { agent: String },
    #[error("script exhausted: no reply for agent {agent:?} turn {turn} (session {session})")]
    ScriptExhausted { agent: String, session: SessionId, turn: usize },
    #[error("request failed after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Http { status: Option<u16>, attempts: u32, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("environment variable {0} is not set")]
    MissingCredential(&'static str),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

/// A chat-completion provider. Shared across threads; one call per session at a time.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: CompletionRequest<'_>) -> Result<Completion, BackendError>;

    /// Model identifier recorded in transcripts.
    fn model(&self) -> &str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(u64);

impl std::fmt::Display for SessionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s{}", self.0)
    }
}

static NEXT_SESSION: AtomicU64 = AtomicU64::new(1);

/// One agent's conversation. History is append-only and alternates
/// user/assistant after the leading system message.
#[derive(Debug, Clone)]
pub struct Session {
    id: SessionId,
    agent_name: String,
    history: Vec<ChatMessage>,
    usage: TokenUsage,
    pending: Vec<String>,
}

impl Session {
    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn agent_name(&self) -> &str {
        &self.agent_name
    }

    pub fn history(&self) -> &[ChatMessage] {
        &self.history
    }

    pub fn usage(&self) -> TokenUsage {
        self.usage
    }

    /// Number of completed user/assistant exchanges.
    pub fn turns(&self) -> usize {
        self.history.iter().filter(|m| m.role == ChatRole::Assistant).count()
    }

    /// Queues context (what the agent heard from others) to be delivered
    /// ahead of the next prompt, in the same user message.
    pub fn queue_context(&mut self, text: impl Into<String>) {
        let text = text.into();
        if !text.trim().is_empty() {
            self.pending.push(text);
        }
    }

    pub fn has_pending_context(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Sends `prompt` (preceded by any queued context) and returns the reply.
    pub fn send(&mut self, backend: &dyn ChatBackend, prompt: &str) -> Result<String, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt { agent: self.agent_name.clone() });
        }
        let content = if self.pending.is_empty() {
            prompt.to_string()
        } else {
            let mut parts = self.pending.clone();
            parts.push(prompt.to_string());
            parts.join("\n\n")
        };
        self.history.push(ChatMessage::user(content));
        let request = CompletionRequest {
            session_id: self.id,
            agent_name: &self.agent_name,
            messages: &self.history,
        };
        match backend.complete(request) {
            Ok(completion) => {
                self.pending.clear();
                self.usage += completion.usage;
                self.history.push(ChatMessage::assistant(completion.content.clone()));
                Ok(completion.content)
            }
            Err(e) => {
                self.history.pop();
                Err(e)
            }
        }
    }
}

/// Opens a fresh session whose history is exactly one system message.
pub fn open_session(agent_name: &str, system_prompt: &str) -> Result<Session, BackendError> {
    if system_prompt.trim().is_empty() {
        return Err(BackendError::EmptyPrompt { agent: agent_name.to_string() });
    }
    Ok(Session {
        id: SessionId(NEXT_SESSION.fetch_add(1, Ordering::Relaxed)),
        agent_name: agent_name.to_string(),
        history: vec![ChatMessage::system(system_prompt)],
        usage: TokenUsage::default(),
        pending: Vec::new(),
    })
}

/// Exponential backoff: `base * 2^retry`, saturating at `cap`.
pub(crate) fn backoff_delay(base: Duration, retry: u32, cap: Duration) -> Duration {
    let factor = 1u32.checked_shl(retry.min(20)).unwrap_or(u32::MAX);
    base.checked_mul(factor).unwrap_or(cap).min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_session_has_single_system_message() {
        let s = open_session("J. Powell", "persona text").unwrap();
        assert_eq!(s.history().len(), 1);
        assert_eq!(s.history()[0].role, ChatRole::System);
        assert!(s.history().iter().all(|m| m.role != ChatRole::Assistant));
        let t = open_session("J. Powell", "persona text").unwrap();
        assert_ne!(s.id(), t.id());
        assert!(open_session("x", "  ").is_err());
    }

    #[test]
    fn send_appends_exchange() {
        let backend = ScriptedBackend::new(Script::default().with_reply("J. Powell", 1, "Completed"));
        let mut s = open_session("J. Powell", "persona").unwrap();
        assert_eq!(s.send(&backend, "read this").unwrap(), "Completed");
        assert_eq!(s.history().len(), 3);
        let err = s.send(&backend, "again").unwrap_err();
        assert!(matches!(err, BackendError::ScriptExhausted { turn: 2, .. }));
        // failed sends leave history untouched
        assert_eq!(s.history().len(), 3);
        assert!(matches!(s.send(&backend, ""), Err(BackendError::EmptyPrompt { .. })));
    }

    #[test]
    fn queued_context_rides_with_next_prompt() {
        let backend = ScriptedBackend::new(Script::default().default_reply("ok"));
        let mut s = open_session("a", "sys").unwrap();
        s.queue_context("heard X");
        s.queue_context("");
        s.send(&backend, "prompt").unwrap();
        assert_eq!(s.history()[1].content, "heard X\n\nprompt");
        assert!(!s.has_pending_context());
        s.send(&backend, "next").unwrap();
        assert_eq!(s.history()[3].content, "next");
    }

    #[test]
    fn backoff_is_non_decreasing_and_capped() {
        let base = Duration::from_millis(100);
        let cap = Duration::from_secs(5);
        let delays: Vec<_> = (0..12).map(|r| backoff_delay(base, r, cap)).collect();
        assert!(delays.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(delays[0], base);
        assert_eq!(delays[1], Duration::from_millis(200));
        assert_eq!(*delays.last().unwrap(), cap);
    }

    proptest::proptest! {
        #[test]
        fn history_length_is_one_plus_two_n(n in 0usize..20) {
            let backend = ScriptedBackend::new(Script::default().default_reply("ok"));
            let mut s = open_session("a", "sys").unwrap();
            for i in 0..n {
                s.send(&backend, &format!("p{i}")).unwrap();
            }
            proptest::prop_assert_eq!(s.history().len(), 1 + 2 * n);
            for (i, m) in s.history().iter().enumerate().skip(1) {
                let expect = if i % 2 == 1 { ChatRole::User } else { ChatRole::Assistant };
                proptest::prop_assert_eq!(m.role, expect);
            }
        }
    }
}

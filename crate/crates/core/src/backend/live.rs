//! OpenAI-compatible chat-completions client.

use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use reqwest::blocking::Client;
use reqwest::Url;
use serde::{Deserialize, Serialize};

use super::{backoff_delay, BackendError, ChatBackend, ChatMessage, Completion, CompletionRequest, TokenUsage};

/// Credential source. Never read from config files or command-line flags.
pub const API_KEY_ENV: &str = "FOMCSIM_API_KEY";

const MAX_RETRIES_LIMIT: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Base URL (`https://api.openai.com/v1`) or the full `.../chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".to_string(),
            model: "gpt-4o-mini".to_string(),
            temperature: 0.7,
            max_tokens: 1024,
            timeout_secs: 120,
            max_retries: 3,
            backoff_base_ms: 1000,
            backoff_cap_ms: 30_000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::Config("max_tokens must be positive".into()));
        }
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(BackendError::Config(format!(
                "max_retries must be <= {MAX_RETRIES_LIMIT}, got {}",
                self.max_retries
            )));
        }
        if self.model.trim().is_empty() {
            return Err(BackendError::Config("model must not be empty".into()));
        }
        self.completions_url().map(|_| ())
    }

    pub fn completions_url(&self) -> Result<Url, BackendError> {
        let trimmed = self.endpoint.trim_end_matches('/');
        let full = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        Url::parse(&full).map_err(|e| BackendError::Config(format!("bad endpoint {:?}: {e}", self.endpoint)))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn backoff_base(&self) -> Duration {
        Duration::from_millis(self.backoff_base_ms)
    }
}

/// One backoff taken while retrying a call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryRecord {
    pub agent: String,
    /// 1-based attempt that failed.
    pub attempt: u32,
    pub status: Option<u16>,
    pub delay: Duration,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum AttemptError {
    Retryable { status: Option<u16>, message: String },
    /// The server refused the request itself (bad key, bad body); retrying cannot help.
    Rejected { status: u16, message: String },
    Fatal(BackendError),
}

/// Rate limits, timeouts and server errors are worth another try.
fn is_retryable(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

pub struct LiveBackend {
    config: BackendConfig,
    url: Url,
    api_key: String,
    client: Client,
    retries: Mutex<Vec<RetryRecord>>,
}

impl std::fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveBackend").field("url", &self.url).field("model", &self.config.model).finish()
    }
}

impl LiveBackend {
    /// Reads the credential from [`API_KEY_ENV`].
    pub fn from_env(config: BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(BackendError::MissingCredential(API_KEY_ENV))?;
        Self::new(config, key)
    }

    pub fn new(config: BackendConfig, api_key: String) -> Result<Self, BackendError> {
        config.validate()?;
        let url = config.completions_url()?;
        let client = Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(Self { config, url, api_key, client, retries: Mutex::new(Vec::new()) })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Every backoff taken so far, in order.
    pub fn retry_log(&self) -> Vec<RetryRecord> {
        self.retries.lock().expect("poisoned").clone()
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Result<Completion, AttemptError> {
        let body = WireRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let response = self
            .client
            .post(self.url.clone())
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| AttemptError::Retryable { status: e.status().map(|s| s.as_u16()), message: e.to_string() })?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            let message = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if is_retryable(status.as_u16()) {
                AttemptError::Retryable { status: Some(status.as_u16()), message }
            } else {
                AttemptError::Rejected { status: status.as_u16(), message }
            });
        }
        let text = response
            .text()
            .map_err(|e| AttemptError::Retryable { status: Some(status.as_u16()), message: e.to_string() })?;
        let wire: WireResponse = serde_json::from_str(&text)
            .map_err(|e| AttemptError::Fatal(BackendError::Malformed(e.to_string())))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| AttemptError::Fatal(BackendError::Malformed("response has no message content".into())))?;
        let usage = wire
            .usage
            .map(|u| TokenUsage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens })
            .unwrap_or_default();
        Ok(Completion { content, usage })
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let cap = Duration::from_millis(self.config.backoff_cap_ms.max(self.config.backoff_base_ms));
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            debug!("{}: request attempt {attempt}", request.agent_name);
            match self.attempt(request.messages) {
                Ok(c) => return Ok(c),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Rejected { status, message }) => {
                    return Err(BackendError::Http { status: Some(status), attempts: attempt, message })
                }
                Err(AttemptError::Retryable { status, message }) => {
                    if attempt > self.config.max_retries {
                        return Err(BackendError::Http { status, attempts: attempt, message });
                    }
                    let delay = backoff_delay(self.config.backoff_base(), attempt - 1, cap);
                    warn!(
                        "{}: attempt {attempt} failed ({message}); retrying in {delay:?}",
                        request.agent_name
                    );
                    self.retries.lock().expect("poisoned").push(RetryRecord {
                        agent: request.agent_name.to_string(),
                        attempt,
                        status,
                        delay,
                    });
                    thread::sleep(delay);
                }
            }
        }
    }

    fn model(&self) -> &str {
        &self.config.model
    }
}

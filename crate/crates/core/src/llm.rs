//! Pluggable chat-completion backends.
//!
//! Three kinds share one trait: an HTTP client speaking the OpenAI-compatible
//! `/chat/completions` wire format, a deterministic scripted backend that
//! pops queued responses, and a replay backend that returns recorded
//! completions keyed by a fingerprint of the request. The orchestrator never
//! looks behind the trait; model identity is configuration, not code.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Scripted,
    Replay,
}

/// Which orchestrator slot a backend serves: the discussion model or the
/// retrospection (critic/proposer) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmChannel {
    Llm1,
    Llm2,
}

impl std::fmt::Display for LlmChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LlmChannel::Llm1 => f.write_str("llm1"),
            LlmChannel::Llm2 => f.write_str("llm2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: MessageRole::User,
            content: content.into(),
        }
    }
}

fn default_temperature() -> f64 {
    0.0
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_max_retries() -> u32 {
    2
}
fn default_retry_backoff_ms() -> u64 {
    250
}
fn default_max_prompt_chars() -> usize {
    131_072
}

/// Backend selection plus the knobs shared by all kinds. `http` requires
/// `base_url` and `model_name`; `scripted`/`replay` require their path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_retry_backoff_ms")]
    pub retry_backoff_ms: u64,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub replay_path: Option<PathBuf>,
    /// Prompts longer than this raise an error instead of being truncated.
    #[serde(default = "default_max_prompt_chars")]
    pub max_prompt_chars: usize,
}

impl BackendConfig {
    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            base_url: None,
            model_name: None,
            api_key_env: None,
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            retry_backoff_ms: default_retry_backoff_ms(),
            script_path: Some(path.into()),
            replay_path: None,
            max_prompt_chars: default_max_prompt_chars(),
        }
    }

    pub fn http(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            base_url: Some(base_url.into()),
            model_name: Some(model_name.into()),
            api_key_env: None,
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            retry_backoff_ms: default_retry_backoff_ms(),
            script_path: None,
            replay_path: None,
            max_prompt_chars: default_max_prompt_chars(),
        }
    }

    /// Short backend identity used in transcripts and summaries.
    pub fn label(&self) -> String {
        match self.kind {
            BackendKind::Http => format!(
                "http:{}",
                self.model_name.as_deref().unwrap_or("<unset>")
            ),
            BackendKind::Scripted => format!(
                "scripted:{}",
                self.script_path
                    .as_deref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "<unset>".into())
            ),
            BackendKind::Replay => "replay".to_string(),
        }
    }

    /// Instantiate the backend this config describes. Replay configs read
    /// the recorded completions of `channel` from the transcript at
    /// `replay_path`.
    pub fn build(&self, channel: LlmChannel) -> Result<Box<dyn ChatBackend>, BackendError> {
        match self.kind {
            BackendKind::Http => Ok(Box::new(HttpBackend::new(self)?)),
            BackendKind::Scripted => {
                let path = self.script_path.as_ref().ok_or_else(|| {
                    BackendError::InvalidConfig("scripted backend requires script_path".into())
                })?;
                Ok(Box::new(ScriptedBackend::from_file(path)?))
            }
            BackendKind::Replay => {
                let path = self.replay_path.as_ref().ok_or_else(|| {
                    BackendError::InvalidConfig("replay backend requires replay_path".into())
                })?;
                let events = crate::transcript::recorded_completions(path, channel)
                    .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;
                Ok(Box::new(ReplayBackend::new(events)))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("environment variable `{0}` with the API key is not set")]
    MissingApiKey(String),
    #[error("prompt of {chars} characters exceeds the configured budget of {limit}")]
    PromptTooLarge { chars: usize, limit: usize },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("scripted backend queue exhausted")]
    ScriptExhausted,
    #[error("scripted response expected the prompt to contain `{expected}` but it did not")]
    ScriptMismatch { expected: String },
    #[error("replay transcript exhausted")]
    ReplayExhausted,
    #[error("replay fingerprint mismatch: recorded {recorded}, got {got}")]
    ReplayFingerprintMismatch { recorded: String, got: String },
    #[error("failed to read script `{path}`: {message}")]
    ScriptIo { path: String, message: String },
}

/// A chat model the orchestrator can query. Implementations are
/// per-episode; `complete` consumes one request at a time.
pub trait ChatBackend: Send {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Stable fingerprint of a request, used to key recorded completions.
pub fn fingerprint_messages(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for message in messages {
        let role = match message.role {
            MessageRole::System => "system",
            MessageRole::User => "user",
            MessageRole::Assistant => "assistant",
        };
        hasher.update(role.as_bytes());
        hasher.update([0u8]);
        hasher.update(message.content.as_bytes());
        hasher.update([0x1eu8]);
    }
    hex::encode(hasher.finalize())
}

// ---------------------------------------------------------------------------
// Scripted backend

/// One queued scripted response. `when_contains` asserts that the prompt the
/// orchestrator built actually contains the given substring, which lets a
/// script prove that e.g. a critique reached the next planning prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when_contains: Option<String>,
}

impl ScriptEntry {
    pub fn new(response: impl Into<String>) -> Self {
        ScriptEntry {
            response: response.into(),
            when_contains: None,
        }
    }

    pub fn when_contains(mut self, needle: impl Into<String>) -> Self {
        self.when_contains = Some(needle.into());
        self
    }
}

#[derive(Debug)]
pub struct ScriptedBackend {
    queue: VecDeque<ScriptEntry>,
}

impl ScriptedBackend {
    pub fn from_entries(entries: Vec<ScriptEntry>) -> Self {
        ScriptedBackend {
            queue: entries.into(),
        }
    }

    /// Load a JSON array of [`ScriptEntry`] values.
    pub fn from_file(path: &std::path::Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::ScriptIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(&text).map_err(|e| BackendError::ScriptIo {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        Ok(Self::from_entries(entries))
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let entry = self.queue.pop_front().ok_or(BackendError::ScriptExhausted)?;
        if let Some(needle) = &entry.when_contains {
            let haystack: String = messages
                .iter()
                .map(|m| m.content.as_str())
                .collect::<Vec<_>>()
                .join("\n");
            if !haystack.contains(needle.as_str()) {
                return Err(BackendError::ScriptMismatch {
                    expected: needle.clone(),
                });
            }
        }
        Ok(entry.response)
    }
}

// ---------------------------------------------------------------------------
// Replay backend

/// Replays the exact completions of a recorded episode. Every request must
/// fingerprint-match the recorded one, in order; any drift is an error.
#[derive(Debug)]
pub struct ReplayBackend {
    events: VecDeque<(String, String)>,
}

impl ReplayBackend {
    /// `events` are (request fingerprint, completion text) pairs in call
    /// order.
    pub fn new(events: Vec<(String, String)>) -> Self {
        ReplayBackend {
            events: events.into(),
        }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let (recorded, completion) =
            self.events.pop_front().ok_or(BackendError::ReplayExhausted)?;
        let got = fingerprint_messages(messages);
        if got != recorded {
            return Err(BackendError::ReplayFingerprintMismatch { recorded, got });
        }
        Ok(completion)
    }
}

// ---------------------------------------------------------------------------
// HTTP backend

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: String,
}

/// Blocking client for OpenAI-compatible `/chat/completions` endpoints with
/// exponential-backoff retries on transport errors and 5xx/429 responses.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_tokens: u32,
    max_retries: u32,
    retry_backoff: Duration,
    max_prompt_chars: usize,
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let base_url = config.base_url.as_deref().ok_or_else(|| {
            BackendError::InvalidConfig("http backend requires base_url".into())
        })?;
        let model = config.model_name.clone().ok_or_else(|| {
            BackendError::InvalidConfig("http backend requires model_name".into())
        })?;
        let api_key = match &config.api_key_env {
            None => None,
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.clone()))?,
            ),
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model,
            api_key,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            max_retries: config.max_retries,
            retry_backoff: Duration::from_millis(config.retry_backoff_ms),
            max_prompt_chars: config.max_prompt_chars,
        })
    }

    fn try_once(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        let mut request = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| (true, e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err((true, format!("server returned {status}")));
        }
        if !status.is_success() {
            return Err((false, format!("server returned {status}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| (false, format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or((false, "response has no choices".to_string()))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let chars: usize = messages.iter().map(|m| m.content.chars().count()).sum();
        if chars > self.max_prompt_chars {
            return Err(BackendError::PromptTooLarge {
                chars,
                limit: self.max_prompt_chars,
            });
        }
        let request = ChatRequest {
            model: &self.model,
            messages: messages
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        MessageRole::System => "system",
                        MessageRole::User => "user",
                        MessageRole::Assistant => "assistant",
                    },
                    content: &m.content,
                })
                .collect(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let body = serde_json::to_value(&request)
            .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;

        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.try_once(&body) {
                Ok(content) => return Ok(content),
                Err((retryable, message)) => {
                    if !retryable {
                        return Err(BackendError::MalformedResponse(message));
                    }
                    if attempt > self.max_retries {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            message,
                        });
                    }
                    std::thread::sleep(self.retry_backoff * 2u32.pow(attempt - 1));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_pops_in_order_and_exhausts() {
        let mut backend = ScriptedBackend::from_entries(vec![ScriptEntry::new("hello")]);
        let messages = [ChatMessage::user("hi")];
        assert_eq!(backend.complete(&messages).unwrap(), "hello");
        assert!(matches!(
            backend.complete(&messages),
            Err(BackendError::ScriptExhausted)
        ));
    }

    #[test]
    fn scripted_when_contains_asserts_on_the_prompt() {
        let mut backend = ScriptedBackend::from_entries(vec![
            ScriptEntry::new("ok").when_contains("magic word")
        ]);
        let miss = [ChatMessage::user("nothing here")];
        assert!(matches!(
            backend.complete(&miss),
            Err(BackendError::ScriptMismatch { .. })
        ));
        let mut backend = ScriptedBackend::from_entries(vec![
            ScriptEntry::new("ok").when_contains("magic word")
        ]);
        let hit = [ChatMessage::user("the magic word appears")];
        assert_eq!(backend.complete(&hit).unwrap(), "ok");
    }

    #[test]
    fn replay_checks_fingerprints_in_order() {
        let messages = [ChatMessage::system("s"), ChatMessage::user("u")];
        let fp = fingerprint_messages(&messages);
        let mut backend = ReplayBackend::new(vec![(fp, "answer".into())]);
        assert_eq!(backend.complete(&messages).unwrap(), "answer");

        let mut backend =
            ReplayBackend::new(vec![("deadbeef".into(), "answer".into())]);
        assert!(matches!(
            backend.complete(&messages),
            Err(BackendError::ReplayFingerprintMismatch { .. })
        ));
    }

    #[test]
    fn fingerprint_separates_role_from_content() {
        let a = [ChatMessage::system("x"), ChatMessage::user("y")];
        let b = [ChatMessage::system("xy"), ChatMessage::user("")];
        let c = [ChatMessage::user("x"), ChatMessage::user("y")];
        assert_ne!(fingerprint_messages(&a), fingerprint_messages(&b));
        assert_ne!(fingerprint_messages(&a), fingerprint_messages(&c));
    }

    #[test]
    fn request_bodies_are_schema_valid_for_odd_prompts() {
        for content in ["", "line\nbreaks", "quotes \" and \\ slashes", "emoji 🤖", "null\0byte"] {
            let request = ChatRequest {
                model: "m",
                messages: vec![WireMessage {
                    role: "user",
                    content,
                }],
                temperature: 0.0,
                max_tokens: 16,
            };
            let body = serde_json::to_string(&request).unwrap();
            let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
            assert_eq!(parsed["model"], "m");
            assert_eq!(parsed["messages"][0]["content"], content);
            assert!(parsed["temperature"].is_number());
            assert!(parsed["max_tokens"].is_u64());
        }
    }

    #[test]
    fn prompt_budget_is_enforced() {
        let mut config = BackendConfig::http("http://127.0.0.1:1", "test-model");
        config.max_prompt_chars = 8;
        let mut backend = HttpBackend::new(&config).unwrap();
        let err = backend
            .complete(&[ChatMessage::user("far too many characters")])
            .unwrap_err();
        assert!(matches!(err, BackendError::PromptTooLarge { .. }));
    }
}

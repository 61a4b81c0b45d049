use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatMessage, Completion, LlmError, ProposalSource, RequestRole};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "SIMGAP_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`; `/v1/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> f64 {
    120.0
}
fn default_backoff() -> u64 {
    500
}

/// Replace every occurrence of `secret` in `text`.
pub fn redact(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "[REDACTED]"),
        _ => text.to_string(),
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpSource {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    transcript: Mutex<Vec<String>>,
}

impl std::fmt::Debug for HttpSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpSource")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "[REDACTED]"))
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Done(String),
    Retry(LlmError),
    Fatal(LlmError),
}

impl HttpSource {
    pub fn new(config: HttpConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent, transcript: Mutex::new(Vec::new()) }
    }

    /// Key taken from the environment.
    pub fn from_env(config: HttpConfig) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(config, key)
    }

    /// Redacted log of every exchange, one JSON object per entry.
    pub fn transcript(&self) -> Vec<String> {
        self.transcript.lock().expect("lock").clone()
    }

    fn record(&self, entry: serde_json::Value) {
        let line = redact(&entry.to_string(), self.api_key.as_deref());
        log::debug!("llm exchange: {line}");
        self.transcript.lock().expect("lock").push(line);
    }

    fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &str) -> Attempt {
        let mut req = self.agent.post(self.url()).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(LlmError::Transport(redact(&e.to_string(), self.api_key.as_deref()))),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string())),
        };
        self.record(json!({"status": status, "response": text}));
        match status {
            200..=299 => Attempt::Done(text),
            429 => Attempt::Retry(LlmError::RateLimited { retries: self.config.max_retries }),
            500..=599 => Attempt::Retry(LlmError::Status { status }),
            _ => Attempt::Fatal(LlmError::Status { status }),
        }
    }
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
    #[serde(default)]
    content: Option<String>,
}

fn parse_content(text: &str) -> Result<String, LlmError> {
    let r: ChatResponse = serde_json::from_str(text).map_err(|e| LlmError::InvalidResponse(e.to_string()))?;
    let content = r
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::InvalidResponse("no choices".into()))?
        .message
        .content
        .unwrap_or_default();
    if content.trim().is_empty() {
        return Err(LlmError::EmptyCompletion);
    }
    Ok(content)
}

impl ProposalSource for HttpSource {
    fn complete(&self, role: RequestRole, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
        })
        .to_string();
        self.record(json!({"role": role.as_str(), "request": serde_json::from_str::<serde_json::Value>(&body).expect("valid json")}));
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return parse_content(&text).map(|text| Completion { text, retry_count: retries }),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    if retries >= self.config.max_retries {
                        return Err(e);
                    }
                    let wait = self.config.backoff_ms.saturating_mul(1 << retries.min(16));
                    log::warn!("chat request failed ({e}); retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                    retries += 1;
                }
            }
        }
    }
}

//! Proposal sources: a live chat-completions client and a scripted stub.

mod http;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{redact, HttpConfig, HttpSource, API_KEY_ENV};
pub use scripted::{Playbook, ScriptedSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {retries} retries")]
    RateLimited { retries: u32 },
    #[error("server returned status {status}")]
    Status { status: u16 },
    #[error("empty completion")]
    EmptyCompletion,
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("playbook exhausted for role {role} at request {index}")]
    PlaybookExhausted { role: RequestRole, index: usize },
    #[error("no messages to send")]
    NoMessages,
    #[error("invalid playbook: {0}")]
    InvalidPlaybook(String),
}

/// Which pipeline stage a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestRole {
    Reward,
    Dr,
}

impl RequestRole {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestRole::Reward => "reward",
            RequestRole::Dr => "dr",
        }
    }
}

impl std::fmt::Display for RequestRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub retry_count: u32,
}

/// Anything that can answer a chat request.
pub trait ProposalSource: Send + Sync {
    fn complete(&self, role: RequestRole, messages: &[ChatMessage]) -> Result<Completion, LlmError>;
}

/// Send `messages` and return the assistant text.
pub fn llm_complete(
    source: &dyn ProposalSource,
    role: RequestRole,
    messages: &[ChatMessage],
) -> Result<Completion, LlmError> {
    if messages.is_empty() {
        return Err(LlmError::NoMessages);
    }
    let c = source.complete(role, messages)?;
    if c.text.trim().is_empty() {
        return Err(LlmError::EmptyCompletion);
    }
    Ok(c)
}

/// Contents of the first fenced block tagged `tag`, if any.
pub fn extract_fenced<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("```{tag}");
    let mut search = 0;
    while let Some(rel) = text[search..].find(&open) {
        let start = search + rel + open.len();
        let rest = &text[start..];
        // The tag must end the fence line; "```rewards" is not a match.
        let line_end = rest.find('\n')?;
        if !rest[..line_end].trim().is_empty() {
            search = start;
            continue;
        }
        let body = &rest[line_end + 1..];
        let close = body.find("```")?;
        return Some(&body[..close]);
    }
    None
}

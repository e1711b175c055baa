//! Chat-completion backends.
//!
//! [`ChatBackend`] is implemented by an HTTP client for chat-completions
//! services ([`LiveBackend`]), a record/replay cache ([`ReplayBackend`]), a
//! deterministic offline stand-in ([`MockBackend`]) and a rate-limiting
//! wrapper ([`Throttled`]).

mod limit;
mod live;
mod mock;
mod replay;

pub use limit::{Throttled, TokenBucket};
pub use live::{LiveBackend, LiveConfig};
pub use mock::MockBackend;
pub use replay::{ReplayBackend, ReplayCache, ReplayMode};

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Distinguishes deliberate repeats of an otherwise identical request so
    /// each gets its own cache entry. Not sent over the wire.
    #[serde(default)]
    pub sample_index: u32,
}

impl ChatRequest {
    /// Temperature 0 and the default output limit.
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self { model: model.into(), messages, temperature: 0.0, max_tokens: DEFAULT_MAX_TOKENS, sample_index: 0 }
    }

    /// Key-sorted, whitespace-free JSON of every field.
    pub fn canonical_json(&self) -> String {
        // serde_json::Value objects are BTreeMaps, so keys come out sorted.
        let value = serde_json::to_value(self).expect("request serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Content of the final user message, or "" if there is none.
    pub fn last_user(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_content: Option<String>,
    #[serde(default)]
    pub usage: Usage,
    pub backend_id: String,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("HTTP {status} from backend after {attempts} attempt(s): {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("replay cache miss for request {hash}")]
    CacheMiss { hash: String },
    #[error("replay cache {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error("cannot decode backend response: {0}")]
    Decode(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Transport failures, rate limiting (429) and server errors (5xx).
    pub fn is_retriable(&self) -> bool {
        match self {
            BackendError::Transport { .. } => true,
            BackendError::Http { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;

    /// Stable identifier recorded in responses and run manifests.
    fn id(&self) -> &str;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }

    fn id(&self) -> &str {
        (**self).id()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }

    fn id(&self) -> &str {
        (**self).id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::system("s"), ChatMessage::user("u")])
    }

    #[test]
    fn canonical_json_is_sorted_and_compact() {
        let json = request().canonical_json();
        assert_eq!(
            json,
            r#"{"max_tokens":1024,"messages":[{"content":"s","role":"system"},{"content":"u","role":"user"}],"model":"m","sample_index":0,"temperature":0.0}"#
        );
    }

    #[test]
    fn hash_depends_on_every_field() {
        let base = request();
        let mut variants = vec![base.clone(); 5];
        variants[0].model = "m2".into();
        variants[1].temperature = 0.5;
        variants[2].max_tokens = 10;
        variants[3].sample_index = 1;
        variants[4].messages[1].content.push(' ');
        for v in variants {
            assert_ne!(v.hash(), base.hash());
        }
        assert_eq!(base.hash(), request().hash());
        assert_eq!(base.hash().len(), 64);
    }

    #[test]
    fn retriable_classification() {
        assert!(BackendError::Transport { attempts: 1, message: String::new() }.is_retriable());
        assert!(BackendError::Http { status: 429, attempts: 1, body: String::new() }.is_retriable());
        assert!(BackendError::Http { status: 503, attempts: 1, body: String::new() }.is_retriable());
        assert!(!BackendError::Http { status: 400, attempts: 1, body: String::new() }.is_retriable());
        assert!(!BackendError::Http { status: 404, attempts: 1, body: String::new() }.is_retriable());
        assert!(!BackendError::CacheMiss { hash: String::new() }.is_retriable());
    }
}

//! HTTP client for chat-completions services.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Environment variable holding the bearer token. When it is unset the
    /// request goes out without an Authorization header.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Retries after the first attempt, for retriable failures only.
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "CLUES_API_KEY".into(),
            timeout_secs: 120,
            max_retries: 4,
            backoff_initial_ms: 500,
            backoff_max_ms: 30_000,
        }
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
    id: String,
    api_key: Option<String>,
    attempts: AtomicU64,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        if !config.endpoint.starts_with("http://") && !config.endpoint.starts_with("https://") {
            return Err(BackendError::Config(format!("endpoint '{}' is not an http(s) URL", config.endpoint)));
        }
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; sending requests without credentials", config.api_key_env);
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { id: format!("live:{}", config.endpoint), config, agent, api_key, attempts: AtomicU64::new(0) })
    }

    /// HTTP round trips attempted so far, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self.config.backoff_initial_ms.saturating_mul(1u64 << retry.min(30));
        Duration::from_millis(ms.min(self.config.backoff_max_ms))
    }

    fn attempt(&self, body: &Value, attempt: u32) -> Result<ChatResponse, BackendError> {
        self.attempts.fetch_add(1, Ordering::Relaxed);
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let transport = |e: ureq::Error| BackendError::Transport { attempts: attempt, message: e.to_string() };
        let mut resp = req.send_json(body).map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status, attempts: attempt, body: truncate(&text, 500) });
        }
        decode(&text, &self.id)
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

/// Extracts the first choice of a chat-completions reply.
fn decode(body: &str, backend_id: &str) -> Result<ChatResponse, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::Decode(e.to_string()))?;
    let message = &v["choices"][0]["message"];
    let text = message["content"].as_str().ok_or_else(|| BackendError::Decode("missing choices[0].message.content".into()))?;
    if text.trim().is_empty() {
        return Err(BackendError::EmptyResponse);
    }
    let reasoning_content = message["reasoning_content"].as_str().filter(|s| !s.is_empty()).map(str::to_string);
    let usage = Usage {
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok(ChatResponse { text: text.to_string(), reasoning_content, usage, backend_id: backend_id.to_string() })
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut retry = 0;
        loop {
            match self.attempt(&body, retry + 1) {
                Err(e) if e.is_retriable() && retry < self.config.max_retries => {
                    let wait = self.backoff(retry);
                    log::warn!("attempt {} failed ({e}); retrying in {wait:?}", retry + 1);
                    std::thread::sleep(wait);
                    retry += 1;
                }
                other => return other,
            }
        }
    }

    fn id(&self) -> &str {
        &self.id
    }
}

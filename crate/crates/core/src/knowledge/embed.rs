//! Text embedders.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::KnowledgeError;
use crate::pool;

pub trait Embedder: Send + Sync {
    /// Identifier recorded with every index built by this embedder.
    fn id(&self) -> &str;

    fn dimension(&self) -> usize;

    /// One vector per input text, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, KnowledgeError>;
}

/// Lower-cased alphanumeric runs.
pub fn word_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// 64-bit FNV-1a, fixed across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Signed feature hashing of word counts, scaled to unit length.
///
/// Each token adds +1 or -1 (top hash bit) at index `hash % dimension`.
/// Because only the direction survives normalization, repeating every token
/// the same number of times leaves the vector unchanged.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dimension: usize,
    id: String,
}

impl HashedEmbedder {
    pub const DEFAULT_DIMENSION: usize = 512;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension, id: format!("hashed-bow-{dimension}") }
    }

    pub fn embed_one(&self, text: &str) -> Result<Vec<f64>, KnowledgeError> {
        if text.trim().is_empty() {
            return Err(KnowledgeError::EmptyText);
        }
        let mut v = vec![0.0; self.dimension];
        for token in word_tokens(text) {
            let h = fnv1a(token.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dimension as u64) as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // No word tokens, or signed collisions cancelled out exactly.
            return Err(KnowledgeError::ZeroVector(text.chars().take(40).collect()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

impl Embedder for HashedEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, KnowledgeError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteEmbedderConfig {
    /// Embeddings endpoint accepting `{"model", "input": [...]}`.
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for RemoteEmbedderConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/embeddings".into(),
            model: "text-embedding-3-small".into(),
            dimension: 1536,
            api_key_env: "CLUES_API_KEY".into(),
            timeout_secs: 60,
            max_retries: 4,
            batch_size: 64,
            max_in_flight: 4,
        }
    }
}

/// Client for an embeddings HTTP service. Batches run concurrently up to
/// `max_in_flight` and are reassembled in input order.
pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    id: String,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self { id: format!("remote:{}", config.model), config, agent, api_key }
    }

    fn batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, KnowledgeError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.request(texts) {
                Err(KnowledgeError::Remote { retriable: true, .. }) if attempt <= self.config.max_retries => {
                    std::thread::sleep(Duration::from_millis(200 << attempt.min(8)));
                }
                other => return other,
            }
        }
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, KnowledgeError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let remote = |retriable, message: String| KnowledgeError::Remote { retriable, message };
        let mut resp = req
            .send_json(json!({ "model": self.config.model, "input": texts }))
            .map_err(|e| remote(true, e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| remote(true, e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(remote(status == 429 || status >= 500, format!("HTTP {status}: {body}")));
        }
        let v: Value = serde_json::from_str(&body).map_err(|e| remote(false, e.to_string()))?;
        let data = v["data"].as_array().ok_or_else(|| remote(false, "missing data array".into()))?;
        if data.len() != texts.len() {
            return Err(remote(false, format!("expected {} embeddings, got {}", texts.len(), data.len())));
        }
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().map_or(pos, |i| i as usize);
            let vector: Vec<f64> = item["embedding"]
                .as_array()
                .ok_or_else(|| remote(false, "missing embedding".into()))?
                .iter()
                .map(|x| x.as_f64().filter(|f| f.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| remote(false, "non-numeric embedding value".into()))?;
            if vector.len() != self.config.dimension {
                return Err(KnowledgeError::DimensionMismatch { expected: self.config.dimension, found: vector.len() });
            }
            *out.get_mut(index).ok_or_else(|| remote(false, format!("index {index} out of range")))? = vector;
        }
        Ok(out)
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, KnowledgeError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(KnowledgeError::EmptyText);
        }
        let batches: Vec<&[&str]> = texts.chunks(self.config.batch_size.max(1)).collect();
        let results = pool::try_map(&batches, self.config.max_in_flight, |_, b| self.batch(b))?;
        Ok(results.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_tokens_collapse() {
        let e = HashedEmbedder::default();
        assert_eq!(e.embed_one("cost cost").unwrap(), e.embed_one("cost").unwrap());
        assert_eq!(e.embed_one("Cost, COST!").unwrap(), e.embed_one("cost").unwrap());
    }

    #[test]
    fn unit_length_and_deterministic() {
        let e = HashedEmbedder::new(64);
        let v = e.embed_one("prices rise when oil costs rise").unwrap();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(v, HashedEmbedder::new(64).embed_one("prices rise when oil costs rise").unwrap());
    }

    #[test]
    fn empty_text_errors() {
        let e = HashedEmbedder::default();
        assert!(matches!(e.embed_one(""), Err(KnowledgeError::EmptyText)));
        assert!(matches!(e.embed_one("   "), Err(KnowledgeError::EmptyText)));
        assert!(matches!(e.embed_one("..."), Err(KnowledgeError::ZeroVector(_))));
    }

    #[test]
    fn hash_is_pinned() {
        // FNV-1a reference values.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}

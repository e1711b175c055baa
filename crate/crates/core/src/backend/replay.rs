//! Append-only record/replay cache keyed by request hash.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};

#[derive(Serialize, Deserialize)]
struct Entry {
    hash: String,
    response: ChatResponse,
}

struct Inner {
    entries: HashMap<String, ChatResponse>,
    file: Option<File>,
}

/// One JSON line per entry: `{"hash": ..., "response": {...}}`. Lookups are
/// exact on the hash; the first entry for a hash wins.
pub struct ReplayCache {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl ReplayCache {
    /// Loads the cache at `path`, which need not exist yet.
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Cache { path: path.to_path_buf(), message };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| err(e.to_string()))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: Entry =
                    serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
                entries.entry(entry.hash).or_insert(entry.response);
            }
        }
        Ok(Self { path: path.to_path_buf(), inner: Mutex::new(Inner { entries, file: None }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, hash: &str) -> Option<ChatResponse> {
        self.inner.lock().expect("cache lock").entries.get(hash).cloned()
    }

    /// Appends an entry unless the hash is already present.
    pub fn insert(&self, hash: &str, response: &ChatResponse) -> Result<(), BackendError> {
        let mut inner = self.inner.lock().expect("cache lock");
        if inner.entries.contains_key(hash) {
            return Ok(());
        }
        let err = |e: std::io::Error| BackendError::Cache { path: self.path.clone(), message: e.to_string() };
        if inner.file.is_none() {
            if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(err)?;
            }
            inner.file = Some(OpenOptions::new().create(true).append(true).open(&self.path).map_err(err)?);
        }
        let line = serde_json::to_string(&Entry { hash: hash.to_string(), response: response.clone() })
            .expect("entry serializes");
        let file = inner.file.as_mut().expect("opened above");
        writeln!(file, "{line}").and_then(|_| file.flush()).map_err(err)?;
        inner.entries.insert(hash.to_string(), response.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    /// Misses go to the wrapped backend and are recorded.
    Record,
    /// Misses are errors.
    Strict,
}

pub struct ReplayBackend {
    cache: ReplayCache,
    inner: Option<Arc<dyn ChatBackend>>,
    id: String,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ReplayBackend {
    pub fn record(cache: ReplayCache, inner: Arc<dyn ChatBackend>) -> Self {
        let id = format!("replay:{}", inner.id());
        Self { cache, inner: Some(inner), id, hits: AtomicU64::new(0), misses: AtomicU64::new(0) }
    }

    pub fn strict(cache: ReplayCache) -> Self {
        Self { cache, inner: None, id: "replay".into(), hits: AtomicU64::new(0), misses: AtomicU64::new(0) }
    }

    pub fn mode(&self) -> ReplayMode {
        if self.inner.is_some() {
            ReplayMode::Record
        } else {
            ReplayMode::Strict
        }
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    /// Requests not found in the cache, whether delegated or refused.
    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let hash = request.hash();
        if let Some(found) = self.cache.get(&hash) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(found);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let inner = self.inner.as_ref().ok_or_else(|| BackendError::CacheMiss { hash: hash.clone() })?;
        let response = inner.complete(request)?;
        self.cache.insert(&hash, &response)?;
        Ok(response)
    }

    fn id(&self) -> &str {
        &self.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ChatMessage, MockBackend};

    fn request(i: usize) -> ChatRequest {
        ChatRequest::new("m", vec![ChatMessage::user(format!("question {i}"))])
    }

    #[test]
    fn record_then_replay_without_inner_calls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let recorder = ReplayBackend::record(ReplayCache::open(&path).unwrap(), Arc::new(MockBackend::new(3)));
        let first = recorder.complete(&request(1)).unwrap();
        let second = recorder.complete(&request(1)).unwrap();
        assert_eq!(first, second);
        assert_eq!((recorder.hits(), recorder.misses()), (1, 1));

        let strict = ReplayBackend::strict(ReplayCache::open(&path).unwrap());
        assert_eq!(strict.complete(&request(1)).unwrap(), first);
        assert_eq!(strict.misses(), 0);
    }

    #[test]
    fn strict_miss_names_hash() {
        let dir = tempfile::tempdir().unwrap();
        let strict = ReplayBackend::strict(ReplayCache::open(&dir.path().join("none.jsonl")).unwrap());
        let err = strict.complete(&request(9)).unwrap_err();
        assert!(err.to_string().contains(&request(9).hash()));
        assert_eq!(strict.mode(), ReplayMode::Strict);
    }

    #[test]
    fn corrupt_line_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "\n{oops}\n").unwrap();
        let err = ReplayCache::open(&path).err().unwrap();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn cache_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let cache = ReplayCache::open(&path).unwrap();
        let r = ChatResponse { text: "a".into(), reasoning_content: None, usage: Default::default(), backend_id: "t".into() };
        cache.insert("h1", &r).unwrap();
        let before = std::fs::read_to_string(&path).unwrap();
        cache.insert("h1", &ChatResponse { text: "b".into(), ..r.clone() }).unwrap();
        cache.insert("h2", &r).unwrap();
        let after = std::fs::read_to_string(&path).unwrap();
        assert!(after.starts_with(&before));
        assert_eq!(after.lines().count(), 2);
        assert_eq!(cache.get("h1").unwrap().text, "a");
    }
}

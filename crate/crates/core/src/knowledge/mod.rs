//! Background knowledge for expert agents.
//!
//! Documents are split into overlapping whitespace-token chunks, embedded and
//! stored in an exhaustive cosine index. For each vignette and corpus the chat
//! backend writes a handful of retrieval queries, which are dealt round-robin
//! to the experts drawing on that corpus; each expert's top-k chunks are then
//! summarized into the text placed in its knowledge slot.

mod chunk;
mod embed;
mod index;
mod rag;

pub use chunk::{chunk_corpus, chunk_document, chunk_spans, KnowledgeChunk};
pub use embed::{word_tokens, Embedder, HashedEmbedder, RemoteEmbedder, RemoteEmbedderConfig};
pub use index::{cosine, Hit, KnowledgeIndex};
pub use rag::{
    acquire_expert_knowledge, distribute_queries, generate_queries, parse_queries, summarize_chunks, ExpertKnowledge,
    KnowledgeBase,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::persona::PersonaError;
use crate::profiles::KnowledgeType;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not valid UTF-8")]
    NotUtf8(PathBuf),
    #[error("invalid retrieval settings: {0}")]
    Config(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("zero vector for '{0}'")]
    ZeroVector(String),
    #[error("non-finite vector component for '{0}'")]
    NonFinite(String),
    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate chunk id '{0}'")]
    DuplicateChunk(String),
    #[error("no chunks to index")]
    NoChunks,
    #[error("index is empty")]
    EmptyIndex,
    #[error("index file {path}, line {line}: {message}")]
    IndexFile { path: PathBuf, line: usize, message: String },
    #[error("embedding service: {message}")]
    Remote { retriable: bool, message: String },
    #[error("no queries returned for {vignette} / {corpus}")]
    NoQueries { vignette: String, corpus: KnowledgeType },
    #[error("no chunks to summarize")]
    NothingToSummarize,
    #[error("index was built with embedder '{index}' but queries use '{embedder}'")]
    EmbedderMismatch { index: String, embedder: String },
    #[error("no knowledge base loaded for corpus {0}")]
    MissingCorpus(KnowledgeType),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PersonaError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Chunks retrieved per query.
    pub k: usize,
    /// Chunk length in whitespace tokens.
    pub chunk_size: usize,
    /// Tokens shared by consecutive chunks.
    pub chunk_overlap: usize,
    /// Queries requested per (vignette, corpus).
    pub queries_per_vignette: usize,
    /// Word budget of each knowledge summary.
    pub summary_words: usize,
    /// Chunks per embedding call while indexing.
    pub embed_batch: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 5, chunk_size: 256, chunk_overlap: 32, queries_per_vignette: 5, summary_words: 150, embed_batch: 64 }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), KnowledgeError> {
        let err = |m: &str| Err(KnowledgeError::Config(m.to_string()));
        if self.k == 0 {
            return err("k must be at least 1");
        }
        if self.chunk_size == 0 {
            return err("chunk_size must be positive");
        }
        if self.chunk_overlap >= self.chunk_size {
            return err("chunk_overlap must be smaller than chunk_size");
        }
        if self.queries_per_vignette == 0 || self.summary_words == 0 {
            return err("queries_per_vignette and summary_words must be positive");
        }
        Ok(())
    }
}

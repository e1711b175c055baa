//! Whitespace-token chunking of text corpora.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KnowledgeError, RetrievalConfig};
use crate::profiles::{Category, KnowledgeType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    /// `<corpus>/<document>#<start token, zero padded>`; sorts by document
    /// then position.
    pub id: String,
    pub document: String,
    pub corpus: KnowledgeType,
    pub start_token: usize,
    pub text: String,
    pub token_count: usize,
}

/// Token ranges `[start, end)` for a document of `len` tokens.
///
/// A document no longer than `size` is one chunk. Otherwise chunks start at
/// every multiple of `size - overlap` below `len`, so consecutive chunks share
/// exactly `overlap` tokens until the end of the document is reached.
pub fn chunk_spans(len: usize, size: usize, overlap: usize) -> Vec<(usize, usize)> {
    assert!(size > 0 && overlap < size, "need 0 <= overlap < size");
    if len == 0 {
        return Vec::new();
    }
    if len <= size {
        return vec![(0, len)];
    }
    (0..len).step_by(size - overlap).map(|start| (start, (start + size).min(len))).collect()
}

pub fn chunk_document(document: &str, corpus: KnowledgeType, text: &str, config: &RetrievalConfig) -> Vec<KnowledgeChunk> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    chunk_spans(tokens.len(), config.chunk_size, config.chunk_overlap)
        .into_iter()
        .map(|(start, end)| KnowledgeChunk {
            id: format!("{}/{document}#{start:07}", corpus.name()),
            document: document.to_string(),
            corpus,
            start_token: start,
            text: tokens[start..end].join(" "),
            token_count: end - start,
        })
        .collect()
}

/// Chunks every `.txt` file directly under `dir`, in file-name order. The
/// document id is the file stem.
pub fn chunk_corpus(dir: &Path, corpus: KnowledgeType, config: &RetrievalConfig) -> Result<Vec<KnowledgeChunk>, KnowledgeError> {
    config.validate()?;
    let io = |path: &Path, source| KnowledgeError::Io { path: path.to_path_buf(), source };
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| io(dir, e)))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"));
    files.sort();
    let mut chunks = Vec::new();
    for path in files {
        let bytes = std::fs::read(&path).map_err(|e| io(&path, e))?;
        let text = String::from_utf8(bytes).map_err(|_| KnowledgeError::NotUtf8(path.clone()))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        chunks.extend(chunk_document(&stem, corpus, &text, config));
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_tokens_size_forty_overlap_ten() {
        let starts: Vec<usize> = chunk_spans(100, 40, 10).into_iter().map(|(s, _)| s).collect();
        assert_eq!(starts, vec![0, 30, 60, 90]);
    }

    #[test]
    fn short_document_is_one_chunk() {
        assert_eq!(chunk_spans(35, 40, 10), vec![(0, 35)]);
        assert_eq!(chunk_spans(40, 40, 10), vec![(0, 40)]);
        assert!(chunk_spans(0, 40, 10).is_empty());
    }

    #[test]
    fn chunk_text_and_ids() {
        let cfg = RetrievalConfig { chunk_size: 3, chunk_overlap: 1, ..Default::default() };
        let chunks = chunk_document("doc", KnowledgeType::News, "a b\nc  d e", &cfg);
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, vec!["a b c", "c d e", "e"]);
        assert_eq!(chunks[1].id, "news/doc#0000002");
        assert!(chunks.iter().all(|c| c.token_count <= 3));
    }

    #[test]
    fn corpus_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(chunk_corpus(dir.path(), KnowledgeType::Fomc, &RetrievalConfig::default()).unwrap().is_empty());
        std::fs::write(dir.path().join("b.txt"), "beta text").unwrap();
        std::fs::write(dir.path().join("a.txt"), "alpha").unwrap();
        std::fs::write(dir.path().join("skip.md"), "ignored").unwrap();
        let chunks = chunk_corpus(dir.path(), KnowledgeType::Fomc, &RetrievalConfig::default()).unwrap();
        let docs: Vec<&str> = chunks.iter().map(|c| c.document.as_str()).collect();
        assert_eq!(docs, vec!["a", "b"]);
        std::fs::write(dir.path().join("c.txt"), [0xff, 0xfe]).unwrap();
        let err = chunk_corpus(dir.path(), KnowledgeType::Fomc, &RetrievalConfig::default()).unwrap_err();
        assert!(err.to_string().contains("c.txt"));
    }

    proptest::proptest! {
        #[test]
        fn overlap_stripped_concatenation_rebuilds_tokens(len in 0usize..400, size in 1usize..60, overlap_frac in 0.0f64..1.0) {
            let overlap = ((size as f64) * overlap_frac) as usize % size;
            let tokens: Vec<usize> = (0..len).collect();
            let mut rebuilt = Vec::new();
            for (i, (s, e)) in chunk_spans(len, size, overlap).into_iter().enumerate() {
                let chunk = &tokens[s..e];
                let skip = if i == 0 { 0 } else { overlap.min(chunk.len()) };
                rebuilt.extend_from_slice(&chunk[skip..]);
            }
            proptest::prop_assert_eq!(rebuilt, tokens);
        }
    }
}

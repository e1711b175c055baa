//! Exhaustive cosine index.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedder, KnowledgeChunk, KnowledgeError};
use crate::profiles::KnowledgeType;

/// Cosine similarity clamped to [-1, 1]; `None` if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    embedder: String,
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corpus: Option<KnowledgeType>,
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    id: String,
    vector: Vec<f64>,
}

/// Chunk vectors from one embedder. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeIndex {
    embedder_id: String,
    dimension: usize,
    corpus: Option<KnowledgeType>,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: String,
    pub score: f64,
}

impl KnowledgeIndex {
    /// Builds from raw rows; every vector must be finite, nonzero and of
    /// length `dimension`.
    pub fn from_rows(
        embedder_id: &str,
        dimension: usize,
        corpus: Option<KnowledgeType>,
        rows: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, KnowledgeError> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len());
        let mut norms = Vec::with_capacity(rows.len());
        let mut seen = std::collections::HashSet::new();
        for (id, v) in rows {
            if !seen.insert(id.clone()) {
                return Err(KnowledgeError::DuplicateChunk(id));
            }
            if v.len() != dimension {
                return Err(KnowledgeError::DimensionMismatch { expected: dimension, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(KnowledgeError::NonFinite(id));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(KnowledgeError::ZeroVector(id));
            }
            ids.push(id);
            vectors.push(v);
            norms.push(norm);
        }
        Ok(Self { embedder_id: embedder_id.to_string(), dimension, corpus, ids, vectors, norms })
    }

    /// Embeds every chunk in batches of `batch_size`.
    pub fn build(chunks: &[KnowledgeChunk], embedder: &dyn Embedder, batch_size: usize) -> Result<Self, KnowledgeError> {
        if chunks.is_empty() {
            return Err(KnowledgeError::NoChunks);
        }
        let corpus = chunks[0].corpus;
        let mixed = chunks.iter().any(|c| c.corpus != corpus);
        let mut rows = Vec::with_capacity(chunks.len());
        for batch in chunks.chunks(batch_size.max(1)) {
            let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
            let vectors = embedder.embed(&texts)?;
            if vectors.len() != batch.len() {
                return Err(KnowledgeError::DimensionMismatch { expected: batch.len(), found: vectors.len() });
            }
            rows.extend(batch.iter().map(|c| c.id.clone()).zip(vectors));
        }
        Self::from_rows(embedder.id(), embedder.dimension(), (!mixed).then_some(corpus), rows)
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn corpus(&self) -> Option<KnowledgeType> {
        self.corpus
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    /// The `k` best chunks by cosine similarity, highest first, ties broken
    /// by ascending chunk id. Scans every entry.
    pub fn retrieve(&self, query: &[f64], k: usize) -> Result<Vec<Hit>, KnowledgeError> {
        if self.is_empty() {
            return Err(KnowledgeError::EmptyIndex);
        }
        if k == 0 {
            return Err(KnowledgeError::Config("k must be at least 1".into()));
        }
        if query.len() != self.dimension {
            return Err(KnowledgeError::DimensionMismatch { expected: self.dimension, found: query.len() });
        }
        let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        if qn == 0.0 || !qn.is_finite() {
            return Err(KnowledgeError::ZeroVector("query".into()));
        }
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .zip(&self.norms)
            .enumerate()
            .map(|(i, (v, n))| {
                let dot: f64 = v.iter().zip(query).map(|(a, b)| a * b).sum();
                ((dot / (n * qn)).clamp(-1.0, 1.0), i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]))
        };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored.into_iter().map(|(score, i)| Hit { chunk_id: self.ids[i].clone(), score }).collect())
    }

    /// JSON lines: a header line, then one `{"id", "vector"}` row per chunk.
    /// Floats are written in shortest round-trip form, so loading restores
    /// every bit.
    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        let io = |source| KnowledgeError::Io { path: path.to_path_buf(), source };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let header = Header {
            embedder: self.embedder_id.clone(),
            dimension: self.dimension,
            corpus: self.corpus,
            count: self.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
        for (id, vector) in self.ids.iter().zip(&self.vectors) {
            let row = serde_json::to_string(&Row { id: id.clone(), vector: vector.clone() }).expect("row serializes");
            writeln!(out, "{row}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, KnowledgeError> {
        let io = |source| KnowledgeError::Io { path: path.to_path_buf(), source };
        let bad = |line: usize, message: String| KnowledgeError::IndexFile { path: path.to_path_buf(), line, message };
        let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
        let first = lines.next().ok_or_else(|| bad(1, "empty file".into()))?.map_err(io)?;
        let header: Header = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
        let mut rows = Vec::with_capacity(header.count);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?;
            rows.push((row.id, row.vector));
        }
        if rows.len() != header.count {
            return Err(bad(0, format!("header announces {} rows, found {}", header.count, rows.len())));
        }
        Self::from_rows(&header.embedder, header.dimension, header.corpus, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn basis() -> KnowledgeIndex {
        KnowledgeIndex::from_rows("t", 2, None, vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![0.0, 1.0])]).unwrap()
    }

    #[test]
    fn orthogonal_basis() {
        let hits = basis().retrieve(&[1.0, 0.0], 1).unwrap();
        assert_eq!(hits, vec![Hit { chunk_id: "a".into(), score: 1.0 }]);
    }

    #[test]
    fn ties_by_id() {
        let hits = basis().retrieve(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2], 2).unwrap();
        assert_eq!(hits[0].chunk_id, "a");
        assert_eq!(hits[1].chunk_id, "b");
        assert!((hits[0].score - FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn errors() {
        let empty = KnowledgeIndex::from_rows("t", 2, None, vec![]).unwrap();
        assert!(matches!(empty.retrieve(&[1.0, 0.0], 1), Err(KnowledgeError::EmptyIndex)));
        assert!(basis().retrieve(&[1.0, 0.0], 0).is_err());
        assert!(basis().retrieve(&[1.0], 1).is_err());
        assert!(KnowledgeIndex::from_rows("t", 2, None, vec![("x".into(), vec![1.0])]).is_err());
        assert!(KnowledgeIndex::from_rows("t", 1, None, vec![("x".into(), vec![f64::NAN])]).is_err());
    }

    #[test]
    fn k_larger_than_index() {
        assert_eq!(basis().retrieve(&[0.3, 0.9], 10).unwrap().len(), 2);
    }

    #[test]
    fn cosine_properties() {
        let a = [0.3, -1.2, 4.0];
        let b = [1.0, 2.0, -0.5];
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&a, &b), cosine(&b, &a));
        assert_eq!(cosine(&a, &[0.0; 3]), None);
    }

    #[test]
    fn save_load_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        let rows = (0..20)
            .map(|i| (format!("c{i:02}"), (0..7).map(|j| ((i * 7 + j) as f64).sin() / 3.0).collect()))
            .collect();
        let index = KnowledgeIndex::from_rows("hashed-bow-7", 7, Some(KnowledgeType::Wikipedia), rows).unwrap();
        index.save(&path).unwrap();
        let loaded = KnowledgeIndex::load(&path).unwrap();
        assert_eq!(loaded, index);
        for (a, b) in loaded.vectors.iter().flatten().zip(index.vectors.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

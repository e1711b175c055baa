//! Lexical and semantic diversity of open-text answers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::knowledge::{cosine, word_tokens, Embedder};
use crate::profiles::PopulationKind;
use crate::runner::ForecastRecord;
use crate::VignetteId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalDiversity {
    pub tokens: usize,
    pub types: usize,
    /// types / tokens.
    pub ttr: f64,
    /// ln(types) / ln(tokens); absent for a single-token corpus.
    pub herdan: Option<f64>,
}

/// Type-token ratio and Herdan index over the concatenation of `texts`.
/// Tokens are lower-cased alphanumeric runs.
pub fn lexical_diversity<S: AsRef<str>>(texts: &[S]) -> Result<LexicalDiversity, AnalysisError> {
    let mut tokens = 0usize;
    let mut types = BTreeSet::new();
    for t in texts {
        for tok in word_tokens(t.as_ref()) {
            tokens += 1;
            types.insert(tok);
        }
    }
    if tokens == 0 {
        return Err(AnalysisError::Invalid("lexical diversity of an empty corpus".into()));
    }
    let types = types.len();
    let herdan = (tokens > 1).then(|| (types as f64).ln() / (tokens as f64).ln());
    Ok(LexicalDiversity { tokens, types, ttr: types as f64 / tokens as f64, herdan })
}

/// Splits on `.`, `?` or `!` followed by whitespace or the end of text and
/// drops empty segments. Punctuation stays with its sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') && chars.peek().is_none_or(|(_, n)| n.is_whitespace()) {
            let end = i + c.len_utf8();
            out.push(&text[start..end]);
            start = end;
        }
    }
    out.push(&text[start..]);
    out.into_iter().map(str::trim).filter(|s| !s.is_empty() && s.chars().any(char::is_alphanumeric)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticDiversity {
    pub documents: usize,
    /// Mean of each document's sentence vectors.
    pub doc_vectors: Vec<Vec<f64>>,
    /// Mean cosine similarity over all unordered document pairs.
    pub mean_similarity: f64,
    /// 1 − mean_similarity.
    pub score: f64,
}

fn mean_vector(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= vectors.len() as f64);
    mean
}

/// Mean pairwise cosine over all unordered pairs and the index pair with the
/// lowest similarity (first in lexical order on ties).
fn pairwise(vectors: &[Vec<f64>]) -> Result<(f64, f64, (usize, usize)), AnalysisError> {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    let mut min = (f64::INFINITY, (0, 0));
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            let s = cosine(&vectors[i], &vectors[j]).ok_or(AnalysisError::ZeroVector)?;
            sum += s;
            pairs += 1;
            if s < min.0 {
                min = (s, (i, j));
            }
        }
    }
    Ok((sum / pairs as f64, min.0, min.1))
}

/// Semantic diversity of at least two documents: each document is the mean
/// of its sentence embeddings, and the score is one minus the mean pairwise
/// cosine similarity.
pub fn semantic_diversity<S: AsRef<str>>(
    documents: &[S],
    embedder: &dyn Embedder,
) -> Result<SemanticDiversity, AnalysisError> {
    if documents.len() < 2 {
        return Err(AnalysisError::Invalid(format!("semantic diversity needs 2+ documents, got {}", documents.len())));
    }
    let sentences: Vec<Vec<&str>> = documents.iter().map(|d| split_sentences(d.as_ref())).collect();
    if let Some(i) = sentences.iter().position(Vec::is_empty) {
        return Err(AnalysisError::Invalid(format!("document {i} has no sentences")));
    }
    let flat: Vec<&str> = sentences.iter().flatten().copied().collect();
    let mut vectors = embedder.embed(&flat)?.into_iter();
    let doc_vectors: Vec<Vec<f64>> =
        sentences.iter().map(|s| mean_vector(&vectors.by_ref().take(s.len()).collect::<Vec<_>>())).collect();
    let (mean_similarity, _, _) = pairwise(&doc_vectors)?;
    Ok(SemanticDiversity { documents: documents.len(), doc_vectors, mean_similarity, score: 1.0 - mean_similarity })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSimilarity {
    pub min_similarity: f64,
    /// The two repeats with the lowest similarity.
    pub pair: (u32, u32),
    /// Repeats that contributed, ascending.
    pub repeats: Vec<u32>,
    /// Repeats dropped for having no considerations.
    pub excluded: Vec<u32>,
}

/// Per (population, vignette): average the embedded considerations within
/// each repeat and report the least similar pair of repeats.
///
/// `repeats` lists the repeats to compare; a repeat without considerations
/// in a cell is excluded with a warning. Cells left with fewer than two
/// repeats are omitted.
pub fn repeat_similarity(
    records: &[ForecastRecord],
    repeats: &[u32],
    embedder: &dyn Embedder,
) -> Result<BTreeMap<(PopulationKind, VignetteId), RepeatSimilarity>, AnalysisError> {
    if repeats.len() < 2 {
        return Err(AnalysisError::Invalid("repeat similarity needs 2+ repeats".into()));
    }
    let mut texts: BTreeMap<(PopulationKind, VignetteId), BTreeMap<u32, Vec<&str>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok() && repeats.contains(&r.repeat)) {
        if let Some(c) = r.considerations.as_deref().filter(|c| !c.trim().is_empty()) {
            texts.entry((r.kind, r.vignette.clone())).or_default().entry(r.repeat).or_default().push(c);
        }
    }
    let mut out = BTreeMap::new();
    for (cell, by_repeat) in texts {
        let excluded: Vec<u32> = repeats.iter().copied().filter(|r| !by_repeat.contains_key(r)).collect();
        if !excluded.is_empty() {
            log::warn!("{} {}: repeats {excluded:?} have no considerations and are excluded", cell.0, cell.1);
        }
        if by_repeat.len() < 2 {
            log::warn!("{} {}: fewer than two repeats with considerations", cell.0, cell.1);
            continue;
        }
        let used: Vec<u32> = by_repeat.keys().copied().collect();
        let means = by_repeat
            .values()
            .map(|t| Ok(mean_vector(&embedder.embed(t)?)))
            .collect::<Result<Vec<_>, AnalysisError>>()?;
        let (_, min, (i, j)) = pairwise(&means)?;
        out.insert(cell, RepeatSimilarity { min_similarity: min, pair: (used[i], used[j]), repeats: used, excluded });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{HashedEmbedder, KnowledgeError};

    #[test]
    fn lexical_examples() {
        assert_eq!(lexical_diversity(&["the cat sat"]).unwrap().ttr, 1.0);
        let l = lexical_diversity(&["the the the"]).unwrap();
        assert!((l.ttr - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(l.herdan, Some(0.0));
        let words: Vec<String> = (0..100).map(|i| format!("w{}", i % 10)).collect();
        let l = lexical_diversity(&[words.join(" ")]).unwrap();
        assert!((l.herdan.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(lexical_diversity(&["one"]).unwrap().herdan, None);
        assert!(lexical_diversity::<&str>(&[]).is_err());
        assert!(lexical_diversity(&["... !!"]).is_err());
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(split_sentences("Prices rise 3.5% now. Jobs fall! Why? "), vec!["Prices rise 3.5% now.", "Jobs fall!", "Why?"]);
        assert_eq!(split_sentences("no terminal punctuation"), vec!["no terminal punctuation"]);
        assert!(split_sentences(" . ! ").is_empty());
    }

    /// Maps a fixed vocabulary onto basis vectors.
    struct Basis;
    impl Embedder for Basis {
        fn id(&self) -> &str {
            "basis"
        }
        fn dimension(&self) -> usize {
            3
        }
        fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, KnowledgeError> {
            Ok(texts
                .iter()
                .map(|t| match t.trim_end_matches('.') {
                    "x" => vec![1.0, 0.0, 0.0],
                    "y" => vec![0.0, 1.0, 0.0],
                    _ => vec![0.0, 0.0, 1.0],
                })
                .collect())
        }
    }

    #[test]
    fn semantic_examples() {
        let e = HashedEmbedder::new(64);
        let same = semantic_diversity(&["Oil costs rise. Firms pay more."; 4], &e).unwrap();
        assert!(same.score.abs() < 1e-9);
        let orth = semantic_diversity(&["x.", "y."], &Basis).unwrap();
        assert!((orth.score - 1.0).abs() < 1e-15);
        assert!(semantic_diversity(&["x."], &Basis).is_err());
        assert!(semantic_diversity(&["x.", "  "], &Basis).is_err());
    }
}

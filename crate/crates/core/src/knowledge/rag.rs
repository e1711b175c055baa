//! Query generation, retrieval and summarization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{chunk_corpus, Embedder, Hit, KnowledgeChunk, KnowledgeError, KnowledgeIndex, RetrievalConfig};
use crate::assets;
use crate::backend::{ChatBackend, ChatMessage, ChatRequest};
use crate::persona::{fill, verbalize};
use crate::pool;
use crate::profiles::{Category, ExpertProfile, KnowledgeType};
use crate::{Scenario, Vignette, VignetteId};

/// Chunks of one corpus with their index.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub corpus: KnowledgeType,
    pub chunks: BTreeMap<String, KnowledgeChunk>,
    pub index: KnowledgeIndex,
}

impl KnowledgeBase {
    pub fn build(
        corpus: KnowledgeType,
        chunks: Vec<KnowledgeChunk>,
        embedder: &dyn Embedder,
        config: &RetrievalConfig,
    ) -> Result<Self, KnowledgeError> {
        let index = KnowledgeIndex::build(&chunks, embedder, config.embed_batch)?;
        let chunks = chunks.into_iter().map(|c| (c.id.clone(), c)).collect();
        Ok(Self { corpus, chunks, index })
    }

    /// Chunks `dir` and indexes the result.
    pub fn from_directory(
        dir: &Path,
        corpus: KnowledgeType,
        embedder: &dyn Embedder,
        config: &RetrievalConfig,
    ) -> Result<Self, KnowledgeError> {
        Self::build(corpus, chunk_corpus(dir, corpus, config)?, embedder, config)
    }

    /// Pairs a persisted index with re-chunked corpus text, checking that
    /// both describe the same chunks.
    pub fn from_parts(corpus: KnowledgeType, chunks: Vec<KnowledgeChunk>, index: KnowledgeIndex) -> Result<Self, KnowledgeError> {
        let chunks: BTreeMap<String, KnowledgeChunk> = chunks.into_iter().map(|c| (c.id.clone(), c)).collect();
        if let Some(missing) = index.ids().iter().find(|id| !chunks.contains_key(*id)) {
            return Err(KnowledgeError::Config(format!("index entry {missing} has no matching chunk in the corpus")));
        }
        Ok(Self { corpus, chunks, index })
    }
}

/// One line per query; numbering, bullets and surrounding quotes removed,
/// duplicates dropped.
pub fn parse_queries(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let mut q = line.trim();
        q = q.trim_start_matches(|c: char| c.is_ascii_digit());
        q = q.trim_start_matches(['.', ')', '-', '*', '\u{2022}', ':']).trim();
        q = q.trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
        if !q.is_empty() && !out.iter().any(|o| o == q) {
            out.push(q.to_string());
        }
    }
    out
}

/// Asks the backend for up to `count` retrieval queries about `vignette`
/// suited to `corpus`.
pub fn generate_queries(
    backend: &dyn ChatBackend,
    model: &str,
    vignette: &Vignette,
    corpus: KnowledgeType,
    count: usize,
) -> Result<Vec<String>, KnowledgeError> {
    let values = BTreeMap::from([
        ("ANALYST_ROLE", "economic forecaster".to_string()),
        ("TOPIC", vignette.id.topic()),
        ("QUESTIONNAIRE", vignette.question_text(Scenario::Rise, true)),
        ("QUERY_COUNT", count.to_string()),
        ("SOURCE_NAME", verbalize::knowledge_source(corpus).to_string()),
    ]);
    let prompt = fill("knowledge/queries", assets::get("knowledge/queries.txt").expect("bundled"), &values)?;
    let response = backend.complete(&ChatRequest::new(model, vec![ChatMessage::user(prompt)]))?;
    let mut queries = parse_queries(&response.text);
    queries.truncate(count);
    if queries.is_empty() {
        return Err(KnowledgeError::NoQueries { vignette: vignette.id.to_string(), corpus });
    }
    Ok(queries)
}

/// Query index for each of `agents` agents, dealt round-robin.
pub fn distribute_queries(query_count: usize, agents: usize) -> Vec<usize> {
    assert!(query_count > 0, "need at least one query");
    (0..agents).map(|i| i % query_count).collect()
}

/// Summarizes retrieved passages within `max_words` words.
pub fn summarize_chunks(
    backend: &dyn ChatBackend,
    model: &str,
    chunks: &[&str],
    max_words: usize,
) -> Result<String, KnowledgeError> {
    if chunks.is_empty() {
        return Err(KnowledgeError::NothingToSummarize);
    }
    let passages = chunks.iter().map(|c| format!("- {}", c.split_whitespace().collect::<Vec<_>>().join(" "))).collect::<Vec<_>>();
    let values = BTreeMap::from([("MAX_WORDS", max_words.to_string()), ("PASSAGES", passages.join("\n"))]);
    let prompt = fill("knowledge/summary", assets::get("knowledge/summary.txt").expect("bundled"), &values)?;
    let response = backend.complete(&ChatRequest::new(model, vec![ChatMessage::user(prompt)]))?;
    let text = response.text.trim();
    if text.split_whitespace().count() > max_words {
        Ok(text.split_whitespace().take(max_words).collect::<Vec<_>>().join(" "))
    } else {
        Ok(text.to_string())
    }
}

/// What one expert learned for one vignette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertKnowledge {
    pub agent_id: String,
    pub vignette: VignetteId,
    pub corpus: KnowledgeType,
    pub query: String,
    pub hits: Vec<Hit>,
    pub summary: String,
}

/// Runs query generation, retrieval and summarization for every expert and
/// vignette. Experts sharing a query share its summary. Output is ordered by
/// vignette, then corpus, then population order.
#[allow(clippy::too_many_arguments)]
pub fn acquire_expert_knowledge(
    experts: &[ExpertProfile],
    vignettes: &[&Vignette],
    bases: &BTreeMap<KnowledgeType, KnowledgeBase>,
    embedder: &dyn Embedder,
    backend: &dyn ChatBackend,
    model: &str,
    config: &RetrievalConfig,
    workers: usize,
) -> Result<Vec<ExpertKnowledge>, KnowledgeError> {
    config.validate()?;
    struct Group<'a> {
        vignette: &'a Vignette,
        corpus: KnowledgeType,
        agents: Vec<&'a ExpertProfile>,
        queries: Vec<String>,
        hits: Vec<Vec<Hit>>,
    }
    let mut groups = Vec::new();
    for vignette in vignettes {
        for corpus in KnowledgeType::ALL {
            let agents: Vec<&ExpertProfile> = experts.iter().filter(|e| e.knowledge_type == *corpus).collect();
            if agents.is_empty() {
                continue;
            }
            let base = bases.get(corpus).ok_or(KnowledgeError::MissingCorpus(*corpus))?;
            if base.index.embedder_id() != embedder.id() {
                return Err(KnowledgeError::EmbedderMismatch {
                    index: base.index.embedder_id().to_string(),
                    embedder: embedder.id().to_string(),
                });
            }
            let queries = generate_queries(backend, model, vignette, *corpus, config.queries_per_vignette)?;
            let texts: Vec<&str> = queries.iter().map(String::as_str).collect();
            let hits = embedder
                .embed(&texts)?
                .iter()
                .map(|q| base.index.retrieve(q, config.k))
                .collect::<Result<Vec<_>, _>>()?;
            groups.push(Group { vignette, corpus: *corpus, agents, queries, hits });
        }
    }

    let jobs: Vec<(usize, usize)> =
        groups.iter().enumerate().flat_map(|(g, group)| (0..group.queries.len()).map(move |q| (g, q))).collect();
    let summaries = pool::try_map(&jobs, workers, |_, &(g, q)| {
        let base = &bases[&groups[g].corpus];
        let texts: Vec<&str> = groups[g].hits[q].iter().map(|h| base.chunks[&h.chunk_id].text.as_str()).collect();
        summarize_chunks(backend, model, &texts, config.summary_words)
    })?;
    let summary_of: BTreeMap<(usize, usize), &String> = jobs.iter().copied().zip(&summaries).collect();

    let mut out = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        for (agent, q) in group.agents.iter().zip(distribute_queries(group.queries.len(), group.agents.len())) {
            out.push(ExpertKnowledge {
                agent_id: agent.id.clone(),
                vignette: group.vignette.id.clone(),
                corpus: group.corpus,
                query: group.queries[q].clone(),
                hits: group.hits[q].clone(),
                summary: summary_of[&(g, q)].clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, ChatResponse, MockBackend};
    use crate::knowledge::{chunk_document, HashedEmbedder};
    use crate::profiles::{generate_synthetic_experts, ExpertMarginals};
    use crate::VignetteSet;

    fn oil() -> Vignette {
        VignetteSet::bundled().get(&VignetteId::new(VignetteId::OIL_PRICE)).unwrap().clone()
    }

    struct Fixed(String);

    impl ChatBackend for Fixed {
        fn complete(&self, _: &ChatRequest) -> Result<ChatResponse, BackendError> {
            Ok(ChatResponse { text: self.0.clone(), reasoning_content: None, usage: Default::default(), backend_id: "fixed".into() })
        }

        fn id(&self) -> &str {
            "fixed"
        }
    }

    #[test]
    fn mock_queries_are_deterministic() {
        let b = MockBackend::new(2);
        let a = generate_queries(&b, "m", &oil(), KnowledgeType::Fomc, 5).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, generate_queries(&b, "m", &oil(), KnowledgeType::Fomc, 5).unwrap());
    }

    #[test]
    fn empty_reply_means_no_queries() {
        let err = generate_queries(&Fixed("  \n".into()), "m", &oil(), KnowledgeType::News, 5).unwrap_err();
        assert!(err.to_string().contains("no queries"));
    }

    #[test]
    fn query_lines_are_cleaned() {
        assert_eq!(parse_queries("1. oil costs\n- \"jobs\"\n\n2) oil costs\n"), vec!["oil costs", "jobs"]);
    }

    #[test]
    fn round_robin_counts() {
        let assigned = distribute_queries(5, 12);
        let mut counts = [0; 5];
        for q in assigned {
            counts[q] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
        assert_eq!(counts.iter().sum::<usize>(), 12);
    }

    #[test]
    fn summary_identity_under_budget() {
        let s = summarize_chunks(&MockBackend::new(1), "m", &["Oil shocks raise costs."], 50).unwrap();
        assert_eq!(s, "Oil shocks raise costs.");
        assert!(matches!(summarize_chunks(&MockBackend::new(1), "m", &[], 50), Err(KnowledgeError::NothingToSummarize)));
    }

    #[test]
    fn summary_respects_budget() {
        let s = summarize_chunks(&Fixed("word ".repeat(500)), "m", &["x"], 20).unwrap();
        assert_eq!(s.split_whitespace().count(), 20);
    }

    #[test]
    fn every_expert_gets_knowledge() {
        let cfg = RetrievalConfig { chunk_size: 20, chunk_overlap: 5, k: 2, ..Default::default() };
        let embedder = HashedEmbedder::new(64);
        let text = "Oil price shocks raise transport costs for firms. Higher costs pass through to consumer prices. \
                    Central banks may respond to inflation with higher rates. Unemployment tends to rise after large shocks.";
        let mut bases = BTreeMap::new();
        for corpus in KnowledgeType::ALL {
            let chunks = chunk_document("doc", *corpus, text, &cfg);
            bases.insert(*corpus, KnowledgeBase::build(*corpus, chunks, &embedder, &cfg).unwrap());
        }
        let experts = generate_synthetic_experts(30, 1, &ExpertMarginals::default()).unwrap();
        let v = oil();
        let got = acquire_expert_knowledge(experts.experts(), &[&v], &bases, &embedder, &MockBackend::new(1), "m", &cfg, 4).unwrap();
        assert_eq!(got.len(), 30);
        assert!(got.iter().all(|k| !k.summary.is_empty() && k.hits.len() == 2));
        let again = acquire_expert_knowledge(experts.experts(), &[&v], &bases, &embedder, &MockBackend::new(1), "m", &cfg, 1).unwrap();
        assert_eq!(got, again);

        let other = HashedEmbedder::new(32);
        let err = acquire_expert_knowledge(experts.experts(), &[&v], &bases, &other, &MockBackend::new(1), "m", &cfg, 1);
        assert!(matches!(err, Err(KnowledgeError::EmbedderMismatch { .. })));
    }
}

//! Builds backends, embedders, populations and knowledge bases from a
//! [`RunConfig`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};

use clues_core::backend::{ChatBackend, LiveBackend, MockBackend, ReplayBackend, ReplayCache, Throttled};
use clues_core::knowledge::{Embedder, HashedEmbedder, KnowledgeBase, KnowledgeChunk, KnowledgeIndex, RemoteEmbedder};
use clues_core::profiles::{
    build_expert_population, generate_expert_base, generate_synthetic_households, ingest_expert_base,
    ingest_households, stratified_subsample, Category, DropReport, ExpertMarginals, KnowledgeType, Population,
    PopulationKind, Provenance, StrataKey,
};
use clues_core::rng::SeedTree;

use crate::config::{BackendKind, EmbedderKind, RunConfig, SubsampleConfig};
use crate::layout::Layout;
use crate::CliError;

/// The chat backend of a command, with the replay layer kept for its
/// hit/miss counters.
pub struct Wired {
    pub backend: Arc<dyn ChatBackend>,
    /// Recorded in run manifests. Live and replay runs share the live id so
    /// a replayed run reproduces the recorded one exactly.
    pub source_id: String,
    pub replay: Option<Arc<ReplayBackend>>,
}

impl Wired {
    pub fn log_cache_use(&self) {
        if let Some(r) = &self.replay {
            log::info!("replay cache {}: {} hits, {} misses", r.cache().path().display(), r.hits(), r.misses());
        }
    }
}

pub fn backend(cfg: &RunConfig) -> Result<Wired> {
    let b = &cfg.backend;
    let live_id = format!("live:{}", b.live.endpoint);
    match b.kind {
        BackendKind::Mock => {
            let seed = SeedTree::new(cfg.seed).child("mock").seed();
            Ok(Wired { backend: Arc::new(MockBackend::new(seed)), source_id: "mock".into(), replay: None })
        }
        BackendKind::Live => {
            let live = LiveBackend::new(b.live.clone())?;
            let throttled: Arc<dyn ChatBackend> = Arc::new(Throttled::new(live, b.max_in_flight, b.requests_per_sec));
            match cfg.cache_path() {
                Some(path) => {
                    let replay = Arc::new(ReplayBackend::record(ReplayCache::open(&path)?, throttled));
                    Ok(Wired { backend: replay.clone(), source_id: live_id, replay: Some(replay) })
                }
                None => Ok(Wired { backend: throttled, source_id: live_id, replay: None }),
            }
        }
        BackendKind::Replay => {
            let path = cfg.cache_path().ok_or_else(|| CliError::Config("the replay backend needs paths.cache".into()))?;
            let replay = Arc::new(ReplayBackend::strict(ReplayCache::open(&path)?));
            Ok(Wired { backend: replay.clone(), source_id: live_id, replay: Some(replay) })
        }
    }
}

pub fn embedder(cfg: &RunConfig) -> Box<dyn Embedder> {
    match cfg.knowledge.embedder {
        EmbedderKind::Hashed => Box::new(HashedEmbedder::new(cfg.knowledge.hashed_dimension)),
        EmbedderKind::Remote => Box::new(RemoteEmbedder::new(cfg.knowledge.remote.clone())),
    }
}

fn delimiter(c: char) -> u8 {
    // ASCII is checked during validation.
    c as u8
}

fn subsample(pop: Population, s: &SubsampleConfig, kind: PopulationKind, tree: SeedTree) -> Result<Population> {
    let Some(n) = s.size else { return Ok(pop) };
    let mut keys = s.keys()?;
    if keys.is_empty() {
        keys = StrataKey::defaults(kind);
    }
    Ok(stratified_subsample(&pop, n, &keys, tree.seed())?)
}

/// Household population and the rows dropped while reading it.
pub fn build_households(cfg: &RunConfig) -> Result<(Population, Option<DropReport>)> {
    let h = &cfg.households;
    let tree = SeedTree::new(cfg.seed).child("households");
    let (pop, report) = match &h.file {
        Some(file) => {
            let path = cfg.resolve(file);
            let (pop, report) = ingest_households(&path, &h.columns, delimiter(h.delimiter))
                .with_context(|| format!("households from {}", path.display()))?;
            (pop, Some(report))
        }
        None => (generate_synthetic_households(h.synthetic_count, tree.child("synthetic").seed(), &h.marginals)?, None),
    };
    Ok((subsample(pop, &h.subsample, PopulationKind::Household, tree.child("subsample"))?, report))
}

/// Expert population (every base row crossed with confidence levels and
/// knowledge types) and the rows dropped while reading the base.
pub fn build_experts(cfg: &RunConfig) -> Result<(Population, Option<DropReport>)> {
    let e = &cfg.experts;
    let tree = SeedTree::new(cfg.seed).child("experts");
    let (pop, report) = match &e.file {
        Some(file) => {
            let path = cfg.resolve(file);
            let (base, report) = ingest_expert_base(&path, &e.columns, delimiter(e.delimiter))
                .with_context(|| format!("forecasters from {}", path.display()))?;
            (build_expert_population(&base)?, Some(report))
        }
        None => {
            let base = generate_expert_base(e.synthetic_base_rows, tree.child("synthetic").seed(), &ExpertMarginals::default())?;
            let mut pop = build_expert_population(&base)?;
            pop.provenance = Provenance::Synthetic;
            (pop, None)
        }
    };
    Ok((subsample(pop, &e.subsample, PopulationKind::Expert, tree.child("subsample"))?, report))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} is missing; run `clues construct` first", path.display())).into())
    }
}

/// Populations persisted by `construct`, for the enabled kinds.
pub fn load_populations(cfg: &RunConfig, layout: &Layout) -> Result<(Option<Population>, Option<Population>)> {
    let load = |enabled: bool, path: &Path| -> Result<Option<Population>> {
        if !enabled {
            return Ok(None);
        }
        require(path)?;
        Ok(Some(Population::load(path)?))
    };
    Ok((load(cfg.households.enabled, &layout.households())?, load(cfg.experts.enabled, &layout.experts())?))
}

pub fn write_chunks(path: &Path, chunks: &[&KnowledgeChunk]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for c in chunks {
        writeln!(out, "{}", serde_json::to_string(c)?)?;
    }
    out.flush()?;
    Ok(())
}

fn read_chunks(path: &Path) -> Result<Vec<KnowledgeChunk>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut chunks = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        chunks.push(chunk);
    }
    Ok(chunks)
}

/// Knowledge bases persisted by `construct`.
pub fn load_knowledge_bases(layout: &Layout) -> Result<BTreeMap<KnowledgeType, KnowledgeBase>> {
    let mut bases = BTreeMap::new();
    for corpus in KnowledgeType::ALL {
        let (index_path, chunk_path) = (layout.index(*corpus), layout.chunks(*corpus));
        require(&index_path)?;
        require(&chunk_path)?;
        let index = KnowledgeIndex::load(&index_path)?;
        let base = KnowledgeBase::from_parts(*corpus, read_chunks(&chunk_path)?, index)
            .with_context(|| format!("knowledge base {}", corpus.name()))?;
        bases.insert(*corpus, base);
    }
    Ok(bases)
}

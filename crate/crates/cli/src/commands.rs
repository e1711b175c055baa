//! The subcommands. Each returns a short summary for the terminal; artifacts
//! go below the configured output directory (see [`Layout`]).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use clues_core::analysis::{ablation_compare, analyze, AnalysisInputs, Report};
use clues_core::knowledge::{acquire_expert_knowledge, chunk_corpus, ExpertKnowledge, KnowledgeBase};
use clues_core::persona::{AblationConfig, Audience};
use clues_core::profiles::{Category, DropReport, KnowledgeType, Population, PopulationKind};
use clues_core::runner::{load_records, run_experiment, save_records, Experiment, ForecastRecord, PopulationRef, RunManifest, RunOutcome};
use clues_core::{Vignette, VignetteId, VignetteSet};

use crate::config::RunConfig;
use crate::layout::{Layout, RunDir};
use crate::wiring::{self, Wired};
use crate::CliError;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value)? + "\n")
}

/// What `construct` produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub households: Option<PopulationSummary>,
    pub experts: Option<PopulationSummary>,
    /// Chunks indexed per corpus.
    pub knowledge: BTreeMap<KnowledgeType, usize>,
    pub household_drops: Option<DropReport>,
    pub expert_drops: Option<DropReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub size: usize,
    pub provenance: String,
    /// Member counts per `field=value`.
    pub counts: BTreeMap<String, usize>,
}

impl PopulationSummary {
    fn of(pop: &Population) -> Self {
        let mut counts = BTreeMap::new();
        let mut add = |field: &str, value: &str| *counts.entry(format!("{field}={value}")).or_default() += 1;
        match pop.kind() {
            PopulationKind::Expert => {
                for e in pop.experts() {
                    add("confidence", e.confidence.name());
                    add("knowledge_type", e.knowledge_type.name());
                }
            }
            PopulationKind::Household => {
                for h in pop.households() {
                    add("age_band", h.age_band());
                    add("income_band", h.income_band.name());
                    add("political_affiliation", h.political_affiliation.name());
                }
            }
        }
        let provenance = serde_json::to_value(pop.provenance).ok().and_then(|v| v.as_str().map(str::to_string));
        Self { size: pop.len(), provenance: provenance.unwrap_or_default(), counts }
    }
}

impl ConstructionReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, summary) in [("households", &self.households), ("experts", &self.experts)] {
            let Some(s) = summary else { continue };
            let _ = writeln!(out, "{name}\t{} agents ({})", s.size, s.provenance);
            for (key, n) in &s.counts {
                let _ = writeln!(out, "{name}[{key}]\t{n}");
            }
        }
        for (corpus, n) in &self.knowledge {
            let _ = writeln!(out, "knowledge[{corpus}]\t{n} chunks");
        }
        for (name, drops) in [("households", &self.household_drops), ("experts", &self.expert_drops)] {
            if let Some(d) = drops {
                let _ = writeln!(out, "{name} input: {} rows read, {} kept, {} dropped", d.rows_read, d.kept, d.dropped_count());
            }
        }
        out
    }
}

/// Builds the populations and knowledge indexes.
pub fn construct(cfg: &RunConfig) -> Result<ConstructionReport> {
    cfg.validate()?;
    let layout = Layout::new(cfg.output_dir());
    create_dir(&layout.construction())?;
    let mut report = ConstructionReport {
        households: None,
        experts: None,
        knowledge: BTreeMap::new(),
        household_drops: None,
        expert_drops: None,
    };
    if cfg.households.enabled {
        let (pop, drops) = wiring::build_households(cfg).context("constructing households")?;
        pop.save(&layout.households())?;
        report.households = Some(PopulationSummary::of(&pop));
        report.household_drops = drops;
    }
    if cfg.experts.enabled {
        let (pop, drops) = wiring::build_experts(cfg).context("constructing experts")?;
        pop.save(&layout.experts())?;
        report.experts = Some(PopulationSummary::of(&pop));
        report.expert_drops = drops;
    }
    if cfg.kam_enabled() {
        create_dir(&layout.index(KnowledgeType::Fomc).with_file_name(""))?;
        let embedder = wiring::embedder(cfg);
        for corpus in KnowledgeType::ALL {
            let dir = cfg.corpus_dir(*corpus).expect("validated");
            let chunks = chunk_corpus(&dir, *corpus, &cfg.knowledge.retrieval)
                .with_context(|| format!("chunking corpus {}", dir.display()))?;
            let base = KnowledgeBase::build(*corpus, chunks, embedder.as_ref(), &cfg.knowledge.retrieval)
                .with_context(|| format!("indexing corpus {}", dir.display()))?;
            base.index.save(&layout.index(*corpus))?;
            wiring::write_chunks(&layout.chunks(*corpus), &base.chunks.values().collect::<Vec<_>>())?;
            report.knowledge.insert(*corpus, base.chunks.len());
        }
    }
    write_file(&layout.construction_report(), report.render())?;
    write_json(&layout.construction().join("report.json"), &report)?;
    Ok(report)
}

/// Counts written to `status.json` beside the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub records: usize,
    pub sessions_total: usize,
    pub sessions_completed: usize,
    pub partial: bool,
    pub error: Option<String>,
    pub parse_failures: usize,
    pub parse_failure_rate: f64,
}

impl RunStatus {
    fn of(manifest: &RunManifest, outcome: &RunOutcome) -> Self {
        Self {
            run_id: manifest.run_id.clone(),
            records: outcome.records.len(),
            sessions_total: outcome.sessions_total,
            sessions_completed: outcome.sessions_completed,
            partial: outcome.partial,
            error: outcome.error.clone(),
            parse_failures: outcome.parse_failures(),
            parse_failure_rate: outcome.parse_failure_rate(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "run {}: {} records from {}/{} sessions, {} parse failures ({:.2}%)",
            self.run_id,
            self.records,
            self.sessions_completed,
            self.sessions_total,
            self.parse_failures,
            100.0 * self.parse_failure_rate
        )
    }
}

fn write_knowledge(path: &Path, entries: &[ExpertKnowledge]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for e in entries {
        writeln!(out, "{}", serde_json::to_string(e)?)?;
    }
    out.flush()?;
    Ok(())
}

fn read_knowledge(path: &Path) -> Result<Vec<ExpertKnowledge>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?,
            );
        }
    }
    Ok(out)
}

/// Runs one experiment into `dir`. With `reuse_knowledge` the expert
/// summaries of an earlier run are used instead of acquiring new ones, so
/// ablated runs differ from their baseline only in the dropped slot.
fn perform_run(
    cfg: &RunConfig,
    layout: &Layout,
    vignettes: &VignetteSet,
    dir: &RunDir,
    wired: &Wired,
    reuse_knowledge: Option<&Path>,
) -> Result<(RunManifest, RunOutcome)> {
    let (households, experts) = wiring::load_populations(cfg, layout)?;
    let persona = cfg.persona()?;
    if dir.0.exists() {
        std::fs::remove_dir_all(&dir.0).with_context(|| format!("clearing {}", dir.0.display()))?;
    }
    create_dir(&dir.0)?;

    let mut knowledge = BTreeMap::new();
    if let (Some(experts), false) = (&experts, cfg.ablation.drop_kam) {
        let entries = match reuse_knowledge {
            Some(path) => read_knowledge(path)?,
            None => {
                let bases = wiring::load_knowledge_bases(layout)?;
                let embedder = wiring::embedder(cfg);
                let vs: Vec<&Vignette> = vignettes.iter().collect();
                acquire_expert_knowledge(
                    experts.experts(),
                    &vs,
                    &bases,
                    embedder.as_ref(),
                    wired.backend.as_ref(),
                    &cfg.backend.model,
                    &cfg.knowledge.retrieval,
                    cfg.workers,
                )
                .context("acquiring expert knowledge")?
            }
        };
        write_knowledge(&dir.knowledge(), &entries)?;
        for e in entries {
            knowledge.insert((e.agent_id, e.vignette), e.summary);
        }
    }

    let mut manifest = RunManifest::new(cfg.seed, &cfg.backend.model, &wired.source_id);
    manifest.repeats = cfg.run.repeats;
    manifest.temperature = cfg.backend.temperature;
    manifest.max_tokens = cfg.backend.max_tokens;
    manifest.ablation = cfg.ablation;
    manifest.conversation = cfg.run.conversation;
    manifest.max_reasks = cfg.run.max_reasks;
    manifest.vignettes = vignettes.ids();
    manifest.populations = households.iter().chain(experts.iter()).map(PopulationRef::of).collect();
    let manifest = manifest.with_derived_id();
    write_json(&dir.manifest(), &manifest)?;

    let exp = Experiment {
        manifest: &manifest,
        households: households.as_ref(),
        experts: experts.as_ref(),
        vignettes,
        persona: &persona,
        knowledge: &knowledge,
        backend: wired.backend.as_ref(),
        workers: cfg.workers,
    };
    let outcome = run_experiment(&exp)?;
    save_records(&dir.records(), &outcome.records)?;
    let status = RunStatus::of(&manifest, &outcome);
    write_json(&dir.status(), &status)?;
    wired.log_cache_use();
    log::info!("{}", status.render());

    if outcome.partial {
        return Err(CliError::Partial {
            completed: outcome.sessions_completed,
            total: outcome.sessions_total,
            message: outcome.error.clone().unwrap_or_default(),
        }
        .into());
    }
    let rate = outcome.parse_failure_rate();
    if rate > cfg.run.parse_failure_threshold {
        return Err(CliError::ParseThreshold { rate, threshold: cfg.run.parse_failure_threshold }.into());
    }
    Ok((manifest, outcome))
}

/// Runs the configured experiment into `runs/<ablation slug>`.
pub fn run(cfg: &RunConfig) -> Result<RunStatus> {
    cfg.validate()?;
    let layout = Layout::new(cfg.output_dir());
    let vignettes = cfg.vignette_set()?;
    let wired = wiring::backend(cfg)?;
    let dir = layout.run(&cfg.ablation.slug());
    let (manifest, outcome) = perform_run(cfg, &layout, &vignettes, &dir, &wired, None)?;
    Ok(RunStatus::of(&manifest, &outcome))
}

/// `wired` is the coding backend, used when `analysis.code_responses` is on.
fn build_report(
    cfg: &RunConfig,
    records: &[ForecastRecord],
    vignettes: &VignetteSet,
    label: &str,
    wired: &Wired,
) -> Result<Report> {
    if records.is_empty() {
        return Err(CliError::Validation("no records to analyze".into()).into());
    }
    let config = cfg.analysis_config()?;
    let wired = cfg.analysis.code_responses.then_some(wired);
    let embedder = cfg.analysis.semantic.then(|| wiring::embedder(cfg));
    let inputs = AnalysisInputs {
        records,
        vignettes,
        coder: wired.as_ref().map(|w| (w.backend.as_ref(), cfg.backend.model.as_str())),
        embedder: embedder.as_deref(),
        config: &config,
        workers: cfg.workers,
    };
    let report = analyze(&inputs, label).with_context(|| format!("analyzing {label}"))?;
    if let Some(w) = wired {
        w.log_cache_use();
    }
    Ok(report)
}

/// Where `analyze` reads and writes.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeArgs {
    /// Records file; the current configuration's run when unset.
    pub results: Option<PathBuf>,
    /// Report label; the run directory's name when unset.
    pub label: Option<String>,
    /// Vignette directory the results were produced with.
    pub vignettes: Option<PathBuf>,
    /// Bundle directory; `reports/<label>` when unset.
    pub bundle: Option<PathBuf>,
}

/// Analyzes a records file into a report bundle.
pub fn analyze_results(cfg: &RunConfig, args: &AnalyzeArgs) -> Result<(Report, PathBuf)> {
    let layout = Layout::new(cfg.output_dir());
    let results = args.results.clone().unwrap_or_else(|| layout.run(&cfg.ablation.slug()).records());
    if !results.exists() {
        return Err(CliError::Usage(format!("{} does not exist; run `clues run` first", results.display())).into());
    }
    let label = args.label.clone().unwrap_or_else(|| {
        results.parent().and_then(Path::file_name).map_or("results".into(), |n| n.to_string_lossy().into_owned())
    });
    let vignettes = match &args.vignettes {
        Some(dir) => VignetteSet::load(dir).with_context(|| format!("vignettes in {}", dir.display()))?,
        None => cfg.vignette_set()?,
    };
    let records = load_records(&results)?;
    let wired = wiring::backend(cfg)?;
    let report = build_report(cfg, &records, &vignettes, &label, &wired)?;
    let bundle = args.bundle.clone().unwrap_or_else(|| layout.report(&label));
    report.write_bundle(&bundle, &records)?;
    Ok((report, bundle))
}

/// Ablation variants for the enabled populations, without duplicates.
pub fn ablation_variants(cfg: &RunConfig) -> Vec<AblationConfig> {
    let mut out: Vec<AblationConfig> = Vec::new();
    for audience in cfg.audiences() {
        for v in AblationConfig::single_flag_variants(audience) {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

/// Result of one ablated run against the full agents.
#[derive(Debug, Clone)]
pub struct AblationSummary {
    pub slug: String,
    pub status: RunStatus,
    pub rendered: String,
}

/// Re-runs the experiment with each single-flag ablation and compares every
/// report with the full agents' report.
pub fn ablate(cfg: &RunConfig) -> Result<Vec<AblationSummary>> {
    cfg.validate()?;
    if !cfg.ablation.is_none() {
        return Err(CliError::Config("ablate starts from the full agents; leave [ablation] unset".into()).into());
    }
    let layout = Layout::new(cfg.output_dir());
    let baseline_dir = layout.run("full");
    let baseline_records = baseline_dir.records();
    if !baseline_records.exists() {
        return Err(CliError::Usage(format!("{} is missing; run `clues run` first", baseline_records.display())).into());
    }
    let vignettes = cfg.vignette_set()?;
    let wired = wiring::backend(cfg)?;
    let baseline_json = layout.report("full").join("report.json");
    let baseline: Report = if baseline_json.exists() {
        let body = std::fs::read_to_string(&baseline_json)?;
        serde_json::from_str(&body).with_context(|| format!("reading {}", baseline_json.display()))?
    } else {
        let records = load_records(&baseline_records)?;
        let report = build_report(cfg, &records, &vignettes, "full", &wired)?;
        report.write_bundle(&layout.report("full"), &records)?;
        report
    };

    let reuse = baseline_dir.knowledge();
    create_dir(&layout.ablation())?;
    let mut summaries = Vec::new();
    let mut combined = String::new();
    for variant in ablation_variants(cfg) {
        let slug = variant.slug();
        let mut vcfg = cfg.clone();
        vcfg.ablation = variant;
        let dir = layout.run(&slug);
        let reuse = (reuse.exists() && !variant.drop_kam).then_some(reuse.as_path());
        let (manifest, outcome) =
            perform_run(&vcfg, &layout, &vignettes, &dir, &wired, reuse).with_context(|| format!("ablation {slug}"))?;
        let report = build_report(&vcfg, &outcome.records, &vignettes, &slug, &wired)?;
        report.write_bundle(&layout.report(&slug), &outcome.records)?;
        let delta = ablation_compare(&baseline, &report)?;
        let rendered = delta.render();
        write_file(&layout.ablation().join(format!("{slug}.txt")), &rendered)?;
        write_file(&layout.ablation().join(format!("{slug}.csv")), delta.to_csv())?;
        combined.push_str(&rendered);
        combined.push('\n');
        summaries.push(AblationSummary { slug, status: RunStatus::of(&manifest, &outcome), rendered });
    }
    write_file(&layout.ablation().join("summary.txt"), combined)?;
    Ok(summaries)
}

/// Runs and analyzes a user-supplied vignette set into `preestimate/`.
pub fn preestimate(cfg: &RunConfig, vignette_dir: &Path) -> Result<(RunStatus, PathBuf)> {
    cfg.validate()?;
    let vignettes = VignetteSet::load(vignette_dir)
        .with_context(|| format!("custom vignettes in {}", vignette_dir.display()))?;
    let layout = Layout::new(cfg.output_dir());
    let root = layout.preestimate();
    let dir = RunDir(root.join("run"));
    let wired = wiring::backend(cfg)?;
    let (manifest, outcome) = perform_run(cfg, &layout, &vignettes, &dir, &wired, None)?;
    let report = build_report(cfg, &outcome.records, &vignettes, "preestimate", &wired)?;
    let bundle = root.join("report");
    report.write_bundle(&bundle, &outcome.records)?;
    Ok((RunStatus::of(&manifest, &outcome), bundle))
}

/// Checks the configuration and every asset it points at.
pub fn validate_config(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let vignettes = cfg.vignette_set()?;
    cfg.persona()?;
    cfg.analysis_config()?;
    let ids: Vec<String> = vignettes.ids().iter().map(|v: &VignetteId| v.to_string()).collect();
    let audiences: Vec<&str> = cfg.audiences().iter().map(|a: &Audience| a.as_str()).collect();
    Ok(format!(
        "configuration OK: seed {}, {} backend, populations [{}], vignettes [{}]",
        cfg.seed,
        serde_json::to_value(cfg.backend.kind)?.as_str().unwrap_or_default(),
        audiences.join(", "),
        ids.join(", ")
    ))
}

//! Run configuration.
//!
//! One TOML file with a section per stage. Relative paths resolve against the
//! directory holding the file. Every field except `seed` has a default; see
//! [`TEMPLATE`] for an annotated example.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use clues_core::analysis::{uniform_edges, AnalysisConfig, RobustKind, WordGroups};
use clues_core::backend::LiveConfig;
use clues_core::knowledge::{RemoteEmbedderConfig, RetrievalConfig};
use clues_core::persona::{AblationConfig, Audience, Persona, TemplateSet};
use clues_core::profiles::{Category, ExpertBaseColumns, HouseholdColumns, HouseholdMarginals, KnowledgeType, PopulationKind, StrataKey};
use clues_core::runner::{ConversationMode, Pct, DEFAULT_MAX_REASKS};
use clues_core::{VignetteId, VignetteSet};

use crate::CliError;

/// Annotated configuration written by `clues init-config`.
pub const TEMPLATE: &str = include_str!("../clues.example.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random draw. Required.
    pub seed: u64,
    /// Worker threads for sessions, knowledge acquisition and coding.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub households: HouseholdsConfig,
    #[serde(default)]
    pub experts: ExpertsConfig,
    #[serde(default)]
    pub knowledge: KnowledgeConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(default)]
    pub analysis: AnalysisSection,
    /// Directory the file was read from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_workers() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Artifacts of every command go below this directory.
    pub output: PathBuf,
    /// Replay cache; when unset live requests are not recorded.
    pub cache: Option<PathBuf>,
    /// Prompt template directory; the bundled templates when unset.
    pub templates: Option<PathBuf>,
    /// Vignette directory; the bundled vignettes when unset.
    pub vignettes: Option<PathBuf>,
    /// Holds one sub-directory of `.txt` files per knowledge corpus
    /// (`fomc`, `news`, `wikipedia`).
    pub corpora: Option<PathBuf>,
    /// Word-group definitions; the bundled set when unset.
    pub word_groups: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { output: "out".into(), cache: None, templates: None, vignettes: None, corpora: None, word_groups: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseholdsConfig {
    pub enabled: bool,
    /// Delimited survey file; synthetic households are generated when unset.
    pub file: Option<PathBuf>,
    pub delimiter: char,
    pub columns: HouseholdColumns,
    /// Size of the synthetic population.
    pub synthetic_count: usize,
    pub marginals: HouseholdMarginals,
    pub subsample: SubsampleConfig,
}

impl Default for HouseholdsConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            file: None,
            delimiter: ',',
            columns: HouseholdColumns::default(),
            synthetic_count: 120,
            marginals: HouseholdMarginals::default(),
            subsample: SubsampleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertsConfig {
    pub enabled: bool,
    /// Delimited forecaster file; a synthetic base is generated when unset.
    pub file: Option<PathBuf>,
    pub delimiter: char,
    pub columns: ExpertBaseColumns,
    /// Rows of the synthetic base; each row becomes 15 agents.
    pub synthetic_base_rows: usize,
    pub subsample: SubsampleConfig,
}

impl Default for ExpertsConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            file: None,
            delimiter: ',',
            columns: ExpertBaseColumns::default(),
            synthetic_base_rows: 29,
            subsample: SubsampleConfig::default(),
        }
    }
}

/// Stratified subsample taken after construction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsampleConfig {
    /// Members kept; the whole population when unset.
    pub size: Option<usize>,
    /// Stratification keys; the population's default keys when empty.
    pub strata: Vec<String>,
}

impl SubsampleConfig {
    pub fn keys(&self) -> Result<Vec<StrataKey>, CliError> {
        self.strata.iter().map(|s| s.parse().map_err(|e| CliError::Config(format!("{e}")))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    /// Offline feature-hashing embedder.
    Hashed,
    /// HTTP embeddings service.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    pub embedder: EmbedderKind,
    pub hashed_dimension: usize,
    pub remote: RemoteEmbedderConfig,
    pub retrieval: RetrievalConfig,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderKind::Hashed,
            hashed_dimension: 256,
            remote: RemoteEmbedderConfig::default(),
            retrieval: RetrievalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// HTTP chat-completions service, recorded into the cache when one is set.
    Live,
    /// Answers only from the cache; a miss is an error.
    Replay,
    /// Deterministic offline stand-in.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Concurrent requests to a live service.
    pub max_in_flight: usize,
    pub requests_per_sec: Option<f64>,
    pub live: LiveConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_tokens: 1024,
            max_in_flight: 8,
            requests_per_sec: None,
            live: LiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub repeats: u32,
    /// Vignette ids; every vignette in the set when empty.
    pub vignettes: Vec<String>,
    pub conversation: ConversationMode,
    pub max_reasks: u32,
    /// Share of unusable records above which `run` exits with status 5.
    pub parse_failure_threshold: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            repeats: 1,
            vignettes: Vec::new(),
            conversation: ConversationMode::Single,
            max_reasks: DEFAULT_MAX_REASKS,
            parse_failure_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// |Δ| in percentage points at or below which a forecast is "no change".
    pub tolerance: f64,
    pub histogram_min: f64,
    pub histogram_max: f64,
    pub histogram_bins: usize,
    pub robust: RobustKind,
    /// Repeat used for the per-run tables; the lowest when unset.
    pub repeat: Option<u32>,
    pub pool_repeats: bool,
    /// Code open-ended answers with the chat backend.
    pub code_responses: bool,
    /// Embed answers for semantic diversity and repeat similarity.
    pub semantic: bool,
    pub response_type_review: Option<PathBuf>,
    pub mechanism_review: Option<PathBuf>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            tolerance: 0.0,
            histogram_min: -5.0,
            histogram_max: 5.0,
            histogram_bins: 40,
            robust: RobustKind::Hc1,
            repeat: None,
            pool_repeats: false,
            code_responses: true,
            semantic: true,
            response_type_review: None,
            mechanism_review: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub repeats: Option<u32>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(kind) = o.backend {
            self.backend.kind = kind;
        }
        if let Some(repeats) = o.repeats {
            self.run.repeats = repeats;
        }
        if let Some(out) = &o.output {
            // Given on the command line, so relative to the working directory.
            self.paths.output = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output)
    }

    pub fn cache_path(&self) -> Option<PathBuf> {
        self.paths.cache.as_deref().map(|p| self.resolve(p))
    }

    /// Whether expert runs need retrieved knowledge.
    pub fn kam_enabled(&self) -> bool {
        self.experts.enabled && !self.ablation.drop_kam
    }

    pub fn corpus_dir(&self, corpus: KnowledgeType) -> Option<PathBuf> {
        self.paths.corpora.as_deref().map(|p| self.resolve(p).join(corpus.name()))
    }

    /// Checks values and that every referenced path exists.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !self.households.enabled && !self.experts.enabled {
            return bad("at least one of [households] and [experts] must be enabled".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.run.repeats == 0 {
            return bad("run.repeats must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.run.parse_failure_threshold) {
            return bad("run.parse_failure_threshold must lie in [0, 1]".into());
        }
        if !(0.0..=2.0).contains(&self.backend.temperature) {
            return bad("backend.temperature must lie in [0, 2]".into());
        }
        if self.backend.max_in_flight == 0 {
            return bad("backend.max_in_flight must be at least 1".into());
        }
        if self.backend.kind == BackendKind::Replay && self.paths.cache.is_none() {
            return bad("the replay backend needs paths.cache".into());
        }
        if self.households.synthetic_count == 0 || self.experts.synthetic_base_rows == 0 {
            return bad("synthetic population sizes must be positive".into());
        }
        if self.knowledge.embedder == EmbedderKind::Hashed && self.knowledge.hashed_dimension == 0 {
            return bad("knowledge.hashed_dimension must be positive".into());
        }
        self.knowledge.retrieval.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.analysis.histogram_bins == 0 || self.analysis.histogram_min.partial_cmp(&self.analysis.histogram_max) != Some(std::cmp::Ordering::Less) {
            return bad("analysis histogram needs bins > 0 and min < max".into());
        }
        if self.analysis.tolerance < 0.0 {
            return bad("analysis.tolerance must be non-negative".into());
        }
        let subsamples = [(PopulationKind::Household, &self.households.subsample), (PopulationKind::Expert, &self.experts.subsample)];
        for (kind, s) in subsamples {
            if let Some(k) = s.keys()?.iter().find(|k| k.applies_to() != kind) {
                return bad(format!("stratification key '{k}' does not apply to {kind} populations"));
            }
            if s.size == Some(0) {
                return bad("subsample size must be positive".into());
            }
        }
        for d in [self.households.delimiter, self.experts.delimiter] {
            if !d.is_ascii() {
                return bad(format!("delimiter '{d}' is not a single ASCII character"));
            }
        }

        let mut required: Vec<(&str, PathBuf)> = Vec::new();
        let optional = [
            ("paths.templates", &self.paths.templates),
            ("paths.vignettes", &self.paths.vignettes),
            ("paths.word_groups", &self.paths.word_groups),
            ("analysis.response_type_review", &self.analysis.response_type_review),
            ("analysis.mechanism_review", &self.analysis.mechanism_review),
        ];
        for (name, p) in optional {
            if let Some(p) = p {
                required.push((name, self.resolve(p)));
            }
        }
        if self.households.enabled {
            if let Some(f) = &self.households.file {
                required.push(("households.file", self.resolve(f)));
            }
        }
        if self.experts.enabled {
            if let Some(f) = &self.experts.file {
                required.push(("experts.file", self.resolve(f)));
            }
        }
        if self.kam_enabled() {
            if self.paths.corpora.is_none() {
                return bad("paths.corpora is required while experts use the knowledge module".into());
            }
            for corpus in KnowledgeType::ALL {
                required.push(("corpus directory", self.corpus_dir(*corpus).expect("corpora set")));
            }
        }
        for (name, path) in required {
            if !path.exists() {
                return Err(CliError::Config(format!("{name} {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn vignette_set(&self) -> Result<VignetteSet, CliError> {
        let set = match &self.paths.vignettes {
            Some(dir) => VignetteSet::load(&self.resolve(dir)).map_err(|e| CliError::Validation(e.to_string()))?,
            None => VignetteSet::bundled(),
        };
        self.select_vignettes(set)
    }

    /// Restricts `set` to `run.vignettes` when that list is non-empty.
    pub fn select_vignettes(&self, set: VignetteSet) -> Result<VignetteSet, CliError> {
        if self.run.vignettes.is_empty() {
            return Ok(set);
        }
        let ids: Vec<VignetteId> = self.run.vignettes.iter().map(VignetteId::new).collect();
        set.select(&ids).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn persona(&self) -> Result<Persona, CliError> {
        match &self.paths.templates {
            Some(dir) => {
                let set = TemplateSet::load(&self.resolve(dir)).map_err(|e| CliError::Validation(e.to_string()))?;
                Ok(Persona::new(set))
            }
            None => Ok(Persona::default()),
        }
    }

    pub fn analysis_config(&self) -> Result<AnalysisConfig, CliError> {
        let a = &self.analysis;
        let word_groups = match &self.paths.word_groups {
            Some(p) => WordGroups::load(&self.resolve(p)).map_err(|e| CliError::Validation(e.to_string()))?,
            None => WordGroups::bundled(),
        };
        Ok(AnalysisConfig {
            tolerance: Pct::from_f64(a.tolerance),
            histogram_edges: uniform_edges(a.histogram_min, a.histogram_max, a.histogram_bins),
            robust: a.robust,
            word_groups,
            repeat: a.repeat,
            pool_repeats: a.pool_repeats,
            response_type_review: a.response_type_review.as_deref().map(|p| self.resolve(p)),
            mechanism_review: a.mechanism_review.as_deref().map(|p| self.resolve(p)),
        })
    }

    /// Audiences with an enabled population.
    pub fn audiences(&self) -> Vec<Audience> {
        let mut out = Vec::new();
        if self.households.enabled {
            out.push(Audience::Household);
        }
        if self.experts.enabled {
            out.push(Audience::Expert);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        let err = RunConfig::parse("[run]\nrepeats = 2\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::parse("seed = 7\n", Path::new("/tmp")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.run.repeats, 1);
        assert_eq!(cfg.backend.kind, BackendKind::Mock);
        assert_eq!(cfg.output_dir(), PathBuf::from("/tmp/out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("seed = 1\n[run]\nrepeat = 2\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("seed = 1\nbogus = 2\n", Path::new(".")).is_err());
    }

    #[test]
    fn example_config_parses() {
        let cfg = RunConfig::parse(TEMPLATE, Path::new(".")).unwrap();
        let defaults = RunConfig::parse(&format!("seed = {}\n", cfg.seed), Path::new(".")).unwrap();
        // The example documents the defaults, apart from the corpora path.
        assert_eq!(RunConfig { paths: defaults.paths.clone(), ..cfg.clone() }, defaults);
        assert!(cfg.paths.corpora.is_some());
    }

    #[test]
    fn kam_needs_corpora() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::parse("seed = 1\n", dir.path()).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("paths.corpora"));
        let cfg = RunConfig::parse("seed = 1\n[paths]\ncorpora = \"missing\"\n", dir.path()).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("missing"), "{err}");
        let cfg = RunConfig::parse("seed = 1\n[ablation]\ndrop_kam = true\n", dir.path()).unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::parse("seed = 1\n", Path::new(".")).unwrap();
        cfg.apply(&Overrides { seed: Some(9), backend: Some(BackendKind::Live), repeats: Some(3), output: None });
        assert_eq!((cfg.seed, cfg.backend.kind, cfg.run.repeats), (9, BackendKind::Live, 3));
    }
}

//! Agent populations: household and expert profile records, ingestion from
//! delimited survey exports, the expert cross-product construction, vignette
//! assignment and stratified subsampling.

mod assign;
mod category;
mod ingest;
mod sample;
mod synthetic;

pub use assign::{assign_vignettes, Assignment};
pub use category::{
    Category, Confidence, Direction, Education, IncomeBand, KnowledgeType, Marital, PoliticalAffiliation, Region,
    Sex, Trend,
};
pub use ingest::{ingest_expert_base, ingest_households, DropReport, ExpertBaseColumns, HouseholdColumns};
pub use sample::{stratified_subsample, StrataKey, UnknownStrataKey};
pub use synthetic::{
    generate_expert_base, generate_synthetic_experts, generate_synthetic_households, generate_synthetic_profiles,
    AgeBand, ExpertMarginals, HouseholdMarginals,
};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed delimited file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("profile file {path} is missing required columns: {}", missing.join(", "))]
    MissingColumns { path: PathBuf, missing: Vec<String> },
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("no valid rows remain after dropping {} invalid rows", report.dropped_count())]
    NoValidRows { report: DropReport },
    #[error("expert base is empty")]
    EmptyBase,
    #[error("requested subsample of {requested} exceeds population of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("unknown stratification key '{key}' for {kind} populations")]
    UnknownStrataKey { key: String, kind: PopulationKind },
    #[error("population size must be positive")]
    ZeroCount,
    #[error("at least one vignette is required")]
    NoVignettes,
    #[error("invalid marginal frequencies: {0}")]
    Marginals(String),
    #[error("invalid population file {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationKind {
    Household,
    Expert,
}

impl PopulationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PopulationKind::Household => "household",
            PopulationKind::Expert => "expert",
        }
    }

    pub fn plural_label(&self) -> &'static str {
        match self {
            PopulationKind::Household => "Household Agents",
            PopulationKind::Expert => "Expert Agents",
        }
    }
}

impl std::fmt::Display for PopulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Synthetic,
}

/// A household's prior about unemployment: either the survey's directional
/// answer or a point forecast in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnemploymentPrior {
    Direction(Direction),
    Percent(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdProfile {
    pub id: String,
    pub age: u32,
    pub sex: Sex,
    pub marital: Marital,
    pub education: Education,
    pub region: Region,
    pub political_affiliation: PoliticalAffiliation,
    pub income_band: IncomeBand,
    /// Expected change in prices over the next 12 months, percent.
    pub prior_inflation_expectation: f64,
    pub prior_unemployment_expectation: UnemploymentPrior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_rates_expectation: Option<Direction>,
}

impl HouseholdProfile {
    /// Age band as reported in the summary tables.
    pub fn age_band(&self) -> &'static str {
        match self.age {
            0..=39 => "under_40",
            40..=64 => "40_to_64",
            _ => "65_and_over",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertProfile {
    pub id: String,
    pub confidence: Confidence,
    pub pce_trend: Trend,
    pub unemployment_trend: Trend,
    pub knowledge_type: KnowledgeType,
}

/// One professional-forecaster source row: the two prior trends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertBase {
    pub pce_trend: Trend,
    pub unemployment_trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "members", rename_all = "snake_case")]
pub enum Members {
    Household(Vec<HouseholdProfile>),
    Expert(Vec<ExpertProfile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub members: Members,
}

impl Population {
    /// Builds a population, rejecting duplicate ids.
    pub fn new(members: Members, provenance: Provenance) -> Result<Self, ProfileError> {
        let pop = Self { provenance, members };
        let mut seen = BTreeSet::new();
        for id in pop.ids() {
            if !seen.insert(id) {
                return Err(ProfileError::DuplicateId(id.to_string()));
            }
        }
        Ok(pop)
    }

    pub fn kind(&self) -> PopulationKind {
        match self.members {
            Members::Household(_) => PopulationKind::Household,
            Members::Expert(_) => PopulationKind::Expert,
        }
    }

    pub fn len(&self) -> usize {
        match &self.members {
            Members::Household(m) => m.len(),
            Members::Expert(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<&str> {
        match &self.members {
            Members::Household(m) => m.iter().map(|p| p.id.as_str()).collect(),
            Members::Expert(m) => m.iter().map(|p| p.id.as_str()).collect(),
        }
    }

    pub fn households(&self) -> &[HouseholdProfile] {
        match &self.members {
            Members::Household(m) => m,
            Members::Expert(_) => &[],
        }
    }

    pub fn experts(&self) -> &[ExpertProfile] {
        match &self.members {
            Members::Expert(m) => m,
            Members::Household(_) => &[],
        }
    }

    pub fn household(&self, id: &str) -> Option<&HouseholdProfile> {
        self.households().iter().find(|p| p.id == id)
    }

    pub fn expert(&self, id: &str) -> Option<&ExpertProfile> {
        self.experts().iter().find(|p| p.id == id)
    }

    /// Keeps the members at `indices`, in the given order.
    pub(crate) fn pick(&self, indices: &[usize]) -> Population {
        let members = match &self.members {
            Members::Household(m) => Members::Household(indices.iter().map(|&i| m[i].clone()).collect()),
            Members::Expert(m) => Members::Expert(indices.iter().map(|&i| m[i].clone()).collect()),
        };
        Population { provenance: self.provenance, members }
    }

    pub fn save(&self, path: &Path) -> Result<(), ProfileError> {
        let body = serde_json::to_string_pretty(self).expect("population serializes");
        std::fs::write(path, body + "\n").map_err(|source| ProfileError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let body =
            std::fs::read_to_string(path).map_err(|source| ProfileError::Io { path: path.to_path_buf(), source })?;
        let pop: Population = serde_json::from_str(&body)
            .map_err(|e| ProfileError::Decode { path: path.to_path_buf(), message: e.to_string() })?;
        Population::new(pop.members, pop.provenance)
    }
}

/// Expands professional-forecaster rows into expert agents: every row is
/// crossed with each knowledge type and each confidence level, so the output
/// has `15 * base.len()` members.
pub fn build_expert_population(base: &[ExpertBase]) -> Result<Population, ProfileError> {
    if base.is_empty() {
        return Err(ProfileError::EmptyBase);
    }
    let mut members = Vec::with_capacity(base.len() * KnowledgeType::ALL.len() * Confidence::ALL.len());
    for (i, row) in base.iter().enumerate() {
        for knowledge_type in KnowledgeType::ALL {
            for confidence in Confidence::ALL {
                members.push(ExpertProfile {
                    id: format!("expert-{:03}-{}-{}", i + 1, knowledge_type.name(), confidence.name()),
                    confidence: *confidence,
                    pce_trend: row.pce_trend,
                    unemployment_trend: row.unemployment_trend,
                    knowledge_type: *knowledge_type,
                });
            }
        }
    }
    Population::new(Members::Expert(members), Provenance::Ingested)
}

/// Largest-remainder apportionment of `n` seats over real weights. Ties in
/// the fractional part go to the lower index.
pub(crate) fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(n: usize) -> Vec<ExpertBase> {
        (0..n)
            .map(|i| ExpertBase {
                pce_trend: Trend::ALL[i % 3],
                unemployment_trend: Trend::ALL[(i + 1) % 3],
            })
            .collect()
    }

    #[test]
    fn expert_cross_product_sizes() {
        assert_eq!(build_expert_population(&base(29)).unwrap().len(), 435);
        assert_eq!(build_expert_population(&base(1)).unwrap().len(), 15);
        assert!(matches!(build_expert_population(&[]), Err(ProfileError::EmptyBase)));
    }

    #[test]
    fn one_base_row_covers_every_pair_once() {
        let pop = build_expert_population(&base(1)).unwrap();
        let pairs: BTreeSet<_> = pop.experts().iter().map(|e| (e.knowledge_type, e.confidence)).collect();
        assert_eq!(pairs.len(), 15);
    }

    #[test]
    fn two_base_rows_give_six_per_confidence() {
        // 2 rows x 3 knowledge types = 6 members at every confidence level.
        let pop = build_expert_population(&base(2)).unwrap();
        assert_eq!(pop.len(), 30);
        for level in Confidence::ALL {
            assert_eq!(pop.experts().iter().filter(|e| e.confidence == *level).count(), 6);
        }
    }

    #[test]
    fn trends_are_replicated() {
        let rows = base(3);
        let pop = build_expert_population(&rows).unwrap();
        for (i, chunk) in pop.experts().chunks(15).enumerate() {
            assert!(chunk.iter().all(|e| e.pce_trend == rows[i].pce_trend));
            assert!(chunk.iter().all(|e| e.unemployment_trend == rows[i].unemployment_trend));
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = ExpertProfile {
            id: "x".into(),
            confidence: Confidence::Weak,
            pce_trend: Trend::StayConstant,
            unemployment_trend: Trend::StayConstant,
            knowledge_type: KnowledgeType::News,
        };
        let err = Population::new(Members::Expert(vec![e.clone(), e]), Provenance::Synthetic).unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(10, &[60.0, 40.0]), vec![6, 4]);
        assert_eq!(apportion(5, &[1.0, 1.0, 1.0, 1.0]), vec![2, 1, 1, 1]);
        assert_eq!(apportion(7, &[1.0, 2.0]).iter().sum::<usize>(), 7);
    }

    #[test]
    fn population_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("experts.json");
        let pop = build_expert_population(&base(2)).unwrap();
        pop.save(&path).unwrap();
        assert_eq!(Population::load(&path).unwrap(), pop);
    }
}

//! Stratified subsampling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::category::Category;
use super::{ExpertProfile, HouseholdProfile, Population, PopulationKind, ProfileError};
use crate::rng::SeedTree;

/// A profile field usable as a stratification variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrataKey {
    AgeBand,
    Sex,
    Marital,
    Education,
    Region,
    PoliticalAffiliation,
    IncomeBand,
    Confidence,
    PceTrend,
    UnemploymentTrend,
    KnowledgeType,
}

impl StrataKey {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrataKey::AgeBand => "age_band",
            StrataKey::Sex => "sex",
            StrataKey::Marital => "marital",
            StrataKey::Education => "education",
            StrataKey::Region => "region",
            StrataKey::PoliticalAffiliation => "political_affiliation",
            StrataKey::IncomeBand => "income_band",
            StrataKey::Confidence => "confidence",
            StrataKey::PceTrend => "pce_trend",
            StrataKey::UnemploymentTrend => "unemployment_trend",
            StrataKey::KnowledgeType => "knowledge_type",
        }
    }

    pub fn applies_to(&self) -> PopulationKind {
        match self {
            StrataKey::Confidence | StrataKey::PceTrend | StrataKey::UnemploymentTrend | StrataKey::KnowledgeType => {
                PopulationKind::Expert
            }
            _ => PopulationKind::Household,
        }
    }

    /// Defaults: political affiliation by income band for households,
    /// confidence for experts.
    pub fn defaults(kind: PopulationKind) -> Vec<StrataKey> {
        match kind {
            PopulationKind::Household => vec![StrataKey::PoliticalAffiliation, StrataKey::IncomeBand],
            PopulationKind::Expert => vec![StrataKey::Confidence],
        }
    }

    fn household_value(&self, p: &HouseholdProfile) -> &'static str {
        match self {
            StrataKey::AgeBand => p.age_band(),
            StrataKey::Sex => p.sex.name(),
            StrataKey::Marital => p.marital.name(),
            StrataKey::Education => p.education.name(),
            StrataKey::Region => p.region.name(),
            StrataKey::PoliticalAffiliation => p.political_affiliation.name(),
            StrataKey::IncomeBand => p.income_band.name(),
            _ => unreachable!("checked by applies_to"),
        }
    }

    fn expert_value(&self, p: &ExpertProfile) -> &'static str {
        match self {
            StrataKey::Confidence => p.confidence.name(),
            StrataKey::PceTrend => p.pce_trend.name(),
            StrataKey::UnemploymentTrend => p.unemployment_trend.name(),
            StrataKey::KnowledgeType => p.knowledge_type.name(),
            _ => unreachable!("checked by applies_to"),
        }
    }
}

impl fmt::Display for StrataKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrataKey(pub String);

impl fmt::Display for UnknownStrataKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown stratification key '{}'", self.0)
    }
}

impl std::error::Error for UnknownStrataKey {}

impl FromStr for StrataKey {
    type Err = UnknownStrataKey;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        const ALL: [StrataKey; 11] = [
            StrataKey::AgeBand,
            StrataKey::Sex,
            StrataKey::Marital,
            StrataKey::Education,
            StrataKey::Region,
            StrataKey::PoliticalAffiliation,
            StrataKey::IncomeBand,
            StrataKey::Confidence,
            StrataKey::PceTrend,
            StrataKey::UnemploymentTrend,
            StrataKey::KnowledgeType,
        ];
        ALL.into_iter().find(|k| k.as_str() == s.trim()).ok_or_else(|| UnknownStrataKey(s.to_string()))
    }
}

/// Draws `n` members so each stratum's count is its population share of `n`
/// rounded by largest remainder (remainder ties go to the earlier stratum in
/// key order). Members within a stratum are chosen by a seeded shuffle; the
/// result keeps population order.
pub fn stratified_subsample(
    pop: &Population,
    n: usize,
    keys: &[StrataKey],
    seed: u64,
) -> Result<Population, ProfileError> {
    if n > pop.len() {
        return Err(ProfileError::SampleTooLarge { requested: n, available: pop.len() });
    }
    if let Some(bad) = keys.iter().find(|k| k.applies_to() != pop.kind()) {
        return Err(ProfileError::UnknownStrataKey { key: bad.as_str().to_string(), kind: pop.kind() });
    }
    let labels: Vec<Vec<&'static str>> = match pop.kind() {
        PopulationKind::Household => {
            pop.households().iter().map(|p| keys.iter().map(|k| k.household_value(p)).collect()).collect()
        }
        PopulationKind::Expert => {
            pop.experts().iter().map(|p| keys.iter().map(|k| k.expert_value(p)).collect()).collect()
        }
    };
    let mut strata: BTreeMap<Vec<&'static str>, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.into_iter().enumerate() {
        strata.entry(label).or_default().push(i);
    }

    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = largest_remainder(n, &sizes);

    let tree = SeedTree::new(seed).child("stratified-subsample");
    let mut chosen = Vec::with_capacity(n);
    for ((label, members), quota) in strata.into_iter().zip(quotas) {
        let mut members = members;
        members.shuffle(&mut tree.child(&label.join("|")).rng());
        chosen.extend_from_slice(&members[..quota]);
    }
    chosen.sort_unstable();
    Ok(pop.pick(&chosen))
}

/// Integer largest-remainder quotas of `n` over stratum `sizes`.
fn largest_remainder(n: usize, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = sizes.iter().map(|s| n * s / total).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(n * sizes[i] % total), i));
    let short = n - quotas.iter().sum::<usize>();
    for &i in &order[..short] {
        quotas[i] += 1;
    }
    quotas
}

//! Synthetic populations drawn from configurable marginal frequencies.
//!
//! Default household marginals follow the category totals of the household
//! survey's valid sample; default expert marginals are uniform over
//! confidence and knowledge type with prior-trend shares of the forecaster
//! sample.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::category::{
    Category, Confidence, Direction, Education, IncomeBand, KnowledgeType, Marital, PoliticalAffiliation, Region, Sex,
    Trend,
};
use super::{
    apportion, ExpertBase, ExpertProfile, HouseholdProfile, Members, Population, PopulationKind, ProfileError,
    Provenance, UnemploymentPrior,
};
use crate::rng::SeedTree;

/// Inclusive age range with a sampling weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBand {
    pub min: u32,
    pub max: u32,
    pub weight: f64,
}

/// Weights are relative frequencies in category declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseholdMarginals {
    pub age_bands: Vec<AgeBand>,
    pub sex: Vec<f64>,
    pub marital: Vec<f64>,
    pub education: Vec<f64>,
    pub region: Vec<f64>,
    pub political_affiliation: Vec<f64>,
    pub income_band: Vec<f64>,
    /// Prior inflation is normal with this mean and sd, clamped to the range
    /// and rounded to one decimal.
    pub inflation_mean: f64,
    pub inflation_sd: f64,
    pub inflation_range: (f64, f64),
    /// More / same / less.
    pub unemployment_direction: Vec<f64>,
    /// Up / same / down.
    pub rates_direction: Vec<f64>,
}

impl Default for HouseholdMarginals {
    fn default() -> Self {
        Self {
            age_bands: vec![
                AgeBand { min: 18, max: 39, weight: 848.0 },
                AgeBand { min: 40, max: 64, weight: 2684.0 },
                AgeBand { min: 65, max: 90, weight: 2500.0 },
            ],
            sex: vec![3849.0, 2183.0],
            marital: vec![4487.0, 581.0, 350.0, 614.0],
            education: vec![7.0, 35.0, 553.0, 1512.0, 1907.0, 2018.0],
            region: vec![1313.0, 1685.0, 922.0, 2112.0],
            political_affiliation: vec![1809.0, 2056.0, 833.0, 713.0, 621.0],
            income_band: vec![567.0, 967.0, 1328.0, 1521.0, 1649.0],
            inflation_mean: 3.5,
            inflation_sd: 3.0,
            inflation_range: (-10.0, 30.0),
            unemployment_direction: vec![0.35, 0.50, 0.15],
            rates_direction: vec![0.35, 0.40, 0.25],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertMarginals {
    pub confidence: Vec<f64>,
    pub knowledge_type: Vec<f64>,
    /// Decrease / constant / increase.
    pub pce_trend: Vec<f64>,
    pub unemployment_trend: Vec<f64>,
}

impl Default for ExpertMarginals {
    fn default() -> Self {
        Self {
            confidence: vec![1.0; 5],
            knowledge_type: vec![1.0; 3],
            pce_trend: vec![31.0, 6.9, 62.1],
            unemployment_trend: vec![27.6, 6.9, 65.5],
        }
    }
}

fn weights(field: &str, w: &[f64], expected: usize) -> Result<WeightedIndex<f64>, ProfileError> {
    if w.len() != expected {
        return Err(ProfileError::Marginals(format!("{field}: expected {expected} weights, got {}", w.len())));
    }
    WeightedIndex::new(w).map_err(|e| ProfileError::Marginals(format!("{field}: {e}")))
}

fn pick<T: Category>(rng: &mut ChaCha8Rng, dist: &WeightedIndex<f64>) -> T {
    T::ALL[dist.sample(rng)]
}

/// Households with ids `synthetic-household-00001`, ... drawn independently
/// per field.
pub fn generate_synthetic_households(
    n: usize,
    seed: u64,
    m: &HouseholdMarginals,
) -> Result<Population, ProfileError> {
    if n == 0 {
        return Err(ProfileError::ZeroCount);
    }
    let age_w: Vec<f64> = m.age_bands.iter().map(|b| b.weight).collect();
    if m.age_bands.iter().any(|b| b.min == 0 || b.min > b.max) {
        return Err(ProfileError::Marginals("age_bands: need 0 < min <= max".into()));
    }
    let age = weights("age_bands", &age_w, m.age_bands.len().max(1))?;
    let sex = weights("sex", &m.sex, Sex::ALL.len())?;
    let marital = weights("marital", &m.marital, Marital::ALL.len())?;
    let education = weights("education", &m.education, Education::ALL.len())?;
    let region = weights("region", &m.region, Region::ALL.len())?;
    let party = weights("political_affiliation", &m.political_affiliation, PoliticalAffiliation::ALL.len())?;
    let income = weights("income_band", &m.income_band, IncomeBand::ALL.len())?;
    let unemp = weights("unemployment_direction", &m.unemployment_direction, 3)?;
    let rates = weights("rates_direction", &m.rates_direction, 3)?;
    let inflation = Normal::new(m.inflation_mean, m.inflation_sd)
        .map_err(|e| ProfileError::Marginals(format!("inflation: {e}")))?;
    let (lo, hi) = m.inflation_range;

    let mut rng = SeedTree::new(seed).child("synthetic-households").rng();
    let mut members = Vec::with_capacity(n);
    for i in 0..n {
        let band = m.age_bands[age.sample(&mut rng)];
        let age = rng.random_range(band.min..=band.max);
        let prior = (inflation.sample(&mut rng).clamp(lo, hi) * 10.0).round() / 10.0;
        members.push(HouseholdProfile {
            id: format!("synthetic-household-{:05}", i + 1),
            age,
            sex: pick(&mut rng, &sex),
            marital: pick(&mut rng, &marital),
            education: pick(&mut rng, &education),
            region: pick(&mut rng, &region),
            political_affiliation: pick(&mut rng, &party),
            income_band: pick(&mut rng, &income),
            prior_inflation_expectation: prior,
            prior_unemployment_expectation: UnemploymentPrior::Direction(pick::<Direction>(&mut rng, &unemp)),
            prior_rates_expectation: Some(pick::<Direction>(&mut rng, &rates)),
        });
    }
    Population::new(Members::Household(members), Provenance::Synthetic)
}

/// Experts with ids `synthetic-expert-0001`, .... The (knowledge type,
/// confidence) cells are filled by largest-remainder apportionment of `n`
/// over the product weights and then shuffled, so uniform marginals with
/// `n = 15` cover every cell exactly once. Prior trends are drawn per agent.
pub fn generate_synthetic_experts(n: usize, seed: u64, m: &ExpertMarginals) -> Result<Population, ProfileError> {
    if n == 0 {
        return Err(ProfileError::ZeroCount);
    }
    weights("confidence", &m.confidence, Confidence::ALL.len())?;
    weights("knowledge_type", &m.knowledge_type, KnowledgeType::ALL.len())?;
    let pce = weights("pce_trend", &m.pce_trend, Trend::ALL.len())?;
    let unemp = weights("unemployment_trend", &m.unemployment_trend, Trend::ALL.len())?;

    let mut cells = Vec::new();
    let mut cell_w = Vec::new();
    for (k, kw) in KnowledgeType::ALL.iter().zip(&m.knowledge_type) {
        for (c, cw) in Confidence::ALL.iter().zip(&m.confidence) {
            cells.push((*k, *c));
            cell_w.push(kw * cw);
        }
    }
    let mut slots = Vec::with_capacity(n);
    for (cell, count) in cells.iter().zip(apportion(n, &cell_w)) {
        slots.extend(std::iter::repeat_n(*cell, count));
    }
    let tree = SeedTree::new(seed).child("synthetic-experts");
    slots.shuffle(&mut tree.child("cells").rng());

    let mut rng = tree.child("trends").rng();
    let members = slots
        .into_iter()
        .enumerate()
        .map(|(i, (knowledge_type, confidence))| ExpertProfile {
            id: format!("synthetic-expert-{:04}", i + 1),
            confidence,
            pce_trend: pick(&mut rng, &pce),
            unemployment_trend: pick(&mut rng, &unemp),
            knowledge_type,
        })
        .collect();
    Population::new(Members::Expert(members), Provenance::Synthetic)
}

/// Forecaster prior-trend rows for the expert cross-product construction.
pub fn generate_expert_base(n: usize, seed: u64, m: &ExpertMarginals) -> Result<Vec<ExpertBase>, ProfileError> {
    if n == 0 {
        return Err(ProfileError::ZeroCount);
    }
    let pce = weights("pce_trend", &m.pce_trend, Trend::ALL.len())?;
    let unemp = weights("unemployment_trend", &m.unemployment_trend, Trend::ALL.len())?;
    let mut rng = SeedTree::new(seed).child("synthetic-expert-base").rng();
    Ok((0..n)
        .map(|_| ExpertBase { pce_trend: pick(&mut rng, &pce), unemployment_trend: pick(&mut rng, &unemp) })
        .collect())
}

/// Either kind with default marginals.
pub fn generate_synthetic_profiles(kind: PopulationKind, n: usize, seed: u64) -> Result<Population, ProfileError> {
    match kind {
        PopulationKind::Household => generate_synthetic_households(n, seed, &HouseholdMarginals::default()),
        PopulationKind::Expert => generate_synthetic_experts(n, seed, &ExpertMarginals::default()),
    }
}

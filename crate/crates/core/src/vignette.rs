//! Questionnaire vignettes.
//!
//! A vignette is an introduction plus three scenario texts. The bundled set
//! holds the four standard shocks; custom sets are loaded from
//! `vignettes/<id>/{introduction,baseline,rise,fall}.txt`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VignetteId(pub String);

impl VignetteId {
    pub const OIL_PRICE: &'static str = "oil_price";
    pub const GOVERNMENT_SPENDING: &'static str = "government_spending";
    pub const FEDERAL_FUNDS_RATE: &'static str = "federal_funds_rate";
    pub const INCOME_TAXES: &'static str = "income_taxes";

    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The four standard vignettes in presentation order.
    pub fn standard() -> Vec<VignetteId> {
        [Self::OIL_PRICE, Self::GOVERNMENT_SPENDING, Self::FEDERAL_FUNDS_RATE, Self::INCOME_TAXES]
            .into_iter()
            .map(VignetteId::new)
            .collect()
    }

    /// Human-readable row label used in rendered tables.
    pub fn display_name(&self) -> String {
        match self.0.as_str() {
            Self::OIL_PRICE => "Oil price".into(),
            Self::GOVERNMENT_SPENDING => "Government spending".into(),
            Self::FEDERAL_FUNDS_RATE => "Federal funds rate".into(),
            Self::INCOME_TAXES => "Income taxes".into(),
            other => {
                let words = other.replace(['_', '-'], " ");
                let mut chars = words.chars();
                match chars.next() {
                    Some(first) => first.to_uppercase().chain(chars).collect(),
                    None => String::new(),
                }
            }
        }
    }

    /// Short topic phrase used when prompting for retrieval queries.
    pub fn topic(&self) -> String {
        match self.0.as_str() {
            Self::OIL_PRICE => "the price of crude oil".into(),
            Self::GOVERNMENT_SPENDING => "federal government spending".into(),
            Self::FEDERAL_FUNDS_RATE => "the federal funds target rate".into(),
            Self::INCOME_TAXES => "income tax rates in the U.S.".into(),
            _ => self.display_name().to_lowercase(),
        }
    }
}

impl fmt::Display for VignetteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Baseline,
    Rise,
    Fall,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::Rise => "rise",
            Scenario::Fall => "fall",
        }
    }

    pub fn is_shock(&self) -> bool {
        !matches!(self, Scenario::Baseline)
    }

    /// The answer-form tag: `(baseline)` or `(alternative)`.
    pub fn answer_tag(&self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            _ => "alternative",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Scenario::Baseline),
            "rise" => Ok(Scenario::Rise),
            "fall" => Ok(Scenario::Fall),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum VignetteError {
    #[error("cannot read vignette asset {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("vignette '{vignette}' is missing its {part} text")]
    MissingPart { vignette: String, part: &'static str },
    #[error("vignette '{vignette}' {scenario} text is missing the answer-form requirement \"{requirement}\"")]
    MissingRequirement {
        vignette: String,
        scenario: Scenario,
        requirement: String,
    },
    #[error("no vignettes found under {0}")]
    Empty(PathBuf),
    #[error("unknown vignette '{0}'")]
    Unknown(String),
}

pub const INFLATION_BOUNDS_LINE: &str =
    "(REQUIREMENTS: MINIMUM VALUE IS -2.00, MAXIMUM VALUE IS 8.00, AND UP TO 2 DECIMAL PLACES ARE ALLOWED)";
pub const UNEMPLOYMENT_BOUNDS_LINE: &str =
    "(REQUIREMENTS: MINIMUM VALUE IS 0.00, MAXIMUM VALUE IS 10.00, AND UP TO 2 DECIMAL PLACES ARE ALLOWED)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vignette {
    pub id: VignetteId,
    pub introduction: String,
    pub baseline: String,
    pub rise: String,
    pub fall: String,
}

impl Vignette {
    pub fn scenario_text(&self, scenario: Scenario) -> &str {
        match scenario {
            Scenario::Baseline => &self.baseline,
            Scenario::Rise => &self.rise,
            Scenario::Fall => &self.fall,
        }
    }

    /// Questionnaire text for one scenario, optionally preceded by the
    /// introduction (separated by a blank line).
    pub fn question_text(&self, scenario: Scenario, with_introduction: bool) -> String {
        if with_introduction {
            format!("{}\n\n{}", self.introduction, self.scenario_text(scenario))
        } else {
            self.scenario_text(scenario).to_string()
        }
    }

    /// Checks that every scenario carries its labeled answer lines with the
    /// numeric bounds the parser enforces.
    pub fn validate(&self) -> Result<(), VignetteError> {
        for scenario in [Scenario::Baseline, Scenario::Rise, Scenario::Fall] {
            let text = self.scenario_text(scenario);
            let tag = scenario.answer_tag();
            let mut required = vec![
                format!("Inflation rate ({tag}): ___% {INFLATION_BOUNDS_LINE}"),
                format!("Unemployment rate ({tag}): ___% {UNEMPLOYMENT_BOUNDS_LINE}"),
            ];
            if scenario.is_shock() {
                required.push("Main considerations (alternative):".to_string());
            }
            for requirement in required {
                if !text.contains(&requirement) {
                    return Err(VignetteError::MissingRequirement {
                        vignette: self.id.0.clone(),
                        scenario,
                        requirement,
                    });
                }
            }
        }
        Ok(())
    }
}

const PARTS: [&str; 4] = ["introduction", "baseline", "rise", "fall"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VignetteSet {
    vignettes: Vec<Vignette>,
}

impl VignetteSet {
    /// The four standard vignettes.
    pub fn bundled() -> Self {
        let mut files: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (path, body) in assets::under("vignettes") {
            if let Some((id, file)) = path.split_once('/') {
                let part = file.trim_end_matches(".txt").to_string();
                files.entry(id.to_string()).or_default().insert(part, body.trim_end().to_string());
            }
        }
        let by_id = Self::assemble(files).expect("bundled vignettes are complete");
        by_id.select(&VignetteId::standard()).expect("bundled vignettes include the standard set")
    }

    /// Loads every vignette directory under `dir` and validates it.
    pub fn load(dir: &Path) -> Result<Self, VignetteError> {
        let io = |source| VignetteError::Io { path: dir.to_path_buf(), source };
        let mut files: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir).map_err(io)?.collect::<Result<_, _>>().map_err(io)?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            if !entry.path().is_dir() {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            let parts = files.entry(id).or_default();
            for part in PARTS {
                let path = entry.path().join(format!("{part}.txt"));
                if path.exists() {
                    let body = std::fs::read_to_string(&path)
                        .map_err(|source| VignetteError::Io { path: path.clone(), source })?;
                    parts.insert(part.to_string(), body.trim_end().to_string());
                }
            }
        }
        if files.is_empty() {
            return Err(VignetteError::Empty(dir.to_path_buf()));
        }
        let set = Self::assemble(files)?;
        for v in &set.vignettes {
            v.validate()?;
        }
        Ok(set)
    }

    fn assemble(files: BTreeMap<String, BTreeMap<String, String>>) -> Result<Self, VignetteError> {
        let mut vignettes = Vec::new();
        for (id, mut parts) in files {
            let mut take = |part: &'static str| {
                parts
                    .remove(part)
                    .filter(|t| !t.trim().is_empty())
                    .ok_or(VignetteError::MissingPart { vignette: id.clone(), part })
            };
            let introduction = take("introduction")?;
            let baseline = take("baseline")?;
            let rise = take("rise")?;
            let fall = take("fall")?;
            vignettes.push(Vignette { id: VignetteId(id.clone()), introduction, baseline, rise, fall });
        }
        Ok(Self { vignettes })
    }

    pub fn from_vignettes(vignettes: Vec<Vignette>) -> Self {
        Self { vignettes }
    }

    /// Sub-set in the requested order.
    pub fn select(&self, ids: &[VignetteId]) -> Result<Self, VignetteError> {
        let vignettes = ids
            .iter()
            .map(|id| self.get(id).cloned().ok_or_else(|| VignetteError::Unknown(id.0.clone())))
            .collect::<Result<_, _>>()?;
        Ok(Self { vignettes })
    }

    pub fn get(&self, id: &VignetteId) -> Option<&Vignette> {
        self.vignettes.iter().find(|v| &v.id == id)
    }

    pub fn ids(&self) -> Vec<VignetteId> {
        self.vignettes.iter().map(|v| v.id.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vignette> {
        self.vignettes.iter()
    }

    pub fn len(&self) -> usize {
        self.vignettes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vignettes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_set_is_standard_and_valid() {
        let set = VignetteSet::bundled();
        assert_eq!(set.ids(), VignetteId::standard());
        for v in set.iter() {
            v.validate().unwrap();
        }
    }

    #[test]
    fn oil_texts_carry_questionnaire_lines() {
        let set = VignetteSet::bundled();
        let oil = set.get(&VignetteId::new(VignetteId::OIL_PRICE)).unwrap();
        assert!(oil.introduction.contains("averaged $74."));
        assert!(oil.rise.contains("the price will be on average $104 for the next 12 months."));
        assert!(oil.fall.contains("the price will be on average $44 for the next 12 months."));
        assert!(oil.baseline.ends_with(
            "Unemployment rate (baseline): ___% (REQUIREMENTS: MINIMUM VALUE IS 0.00, MAXIMUM VALUE IS 10.00, AND UP TO 2 DECIMAL PLACES ARE ALLOWED)."
        ));
        let full = oil.question_text(Scenario::Baseline, true);
        assert!(full.starts_with("The following scenarios deal with the price of crude oil."));
    }

    #[test]
    fn missing_bounds_line_is_reported() {
        let mut v = VignetteSet::bundled().iter().next().unwrap().clone();
        v.rise = v.rise.replace(UNEMPLOYMENT_BOUNDS_LINE, "");
        let err = v.validate().unwrap_err();
        match err {
            VignetteError::MissingRequirement { scenario, requirement, .. } => {
                assert_eq!(scenario, Scenario::Rise);
                assert!(requirement.contains("MINIMUM VALUE IS 0.00"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn display_names() {
        assert_eq!(VignetteId::new("federal_funds_rate").display_name(), "Federal funds rate");
        assert_eq!(VignetteId::new("housing_boom").display_name(), "Housing boom");
    }
}

//! Word-group tagging of open-text answers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::AnalysisError;
use crate::knowledge::word_tokens;

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordGroup {
    #[serde(default)]
    pub stems: Vec<String>,
    #[serde(default)]
    pub words: Vec<String>,
    #[serde(default)]
    pub phrases: Vec<String>,
}

impl WordGroup {
    fn matches(&self, tokens: &[String]) -> bool {
        let stem = |t: &str, s: &str| t.starts_with(s);
        if tokens.iter().any(|t| self.stems.iter().any(|s| stem(t, s)) || self.words.iter().any(|w| t == w)) {
            return true;
        }
        self.phrases.iter().any(|phrase| {
            let parts: Vec<&str> = phrase.split_whitespace().collect();
            let Some((last, head)) = parts.split_last() else { return false };
            tokens.windows(parts.len()).any(|w| {
                head.iter().zip(w).all(|(p, t)| t == p) && stem(&w[parts.len() - 1], last)
            })
        })
    }
}

/// Named word groups, loaded from TOML. Terms are lower-cased on load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordGroups {
    groups: BTreeMap<String, WordGroup>,
}

impl WordGroups {
    pub fn bundled() -> Self {
        Self::parse(crate::assets::get("word_groups.toml").expect("bundled word groups"))
            .expect("bundled word groups parse")
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| AnalysisError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let raw: BTreeMap<String, WordGroup> =
            toml::from_str(text).map_err(|e| AnalysisError::Invalid(format!("word groups: {e}")))?;
        let lower = |v: Vec<String>| v.into_iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        let groups = raw
            .into_iter()
            .map(|(name, g)| {
                (name, WordGroup { stems: lower(g.stems), words: lower(g.words), phrases: lower(g.phrases) })
            })
            .collect();
        Ok(Self { groups })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    /// Whether `text` mentions each group.
    pub fn tags(&self, text: &str) -> BTreeMap<String, bool> {
        let tokens: Vec<String> = word_tokens(text).collect();
        self.groups.iter().map(|(name, g)| (name.clone(), g.matches(&tokens))).collect()
    }
}

/// Tags `text` with the bundled groups: cost, demand, labor, central_bank.
pub fn word_group_tags(text: &str) -> BTreeMap<String, bool> {
    WordGroups::bundled().tags(text)
}

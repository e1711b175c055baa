//! Statistics over forecast records: direction tables, effect
//! distributions, mechanism regressions, text coding and diversity.

mod coding;
mod direction;
mod distribution;
mod diversity;
mod ols;
mod report;
mod words;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coding::{
    apply_mechanism_review, apply_response_type_review, code_mechanisms, code_response_types, parse_categories,
    parse_mechanism_codes, write_mechanism_review, write_response_type_review, Channel, CodeDirection, CodingStatus,
    MechanismCode, MechanismCoding, RecordId, ResponseType, ResponseTypeCoding, ANY_MECHANISM,
};
pub use direction::{direction_table, display_percent, Cell, DirectionCounts, DirectionTable};
pub use distribution::{
    effect_distribution, effect_distributions, quantile_sorted, uniform_edges, EffectDistribution, Histogram, Summary,
    QUANTILE_PROBS, QUANTILE_RULE,
};
pub use diversity::{
    lexical_diversity, repeat_similarity, semantic_diversity, split_sentences, LexicalDiversity, RepeatSimilarity,
    SemanticDiversity,
};
pub use ols::{ols_robust, Design, RegressionResult, RobustKind};
pub use report::{
    ablation_compare, analyze, AblationDelta, AnalysisConfig, AnalysisInputs, CellDelta, MechanismRegression, Report,
    SemanticCell, TextSource,
};
pub use words::{word_group_tags, WordGroup, WordGroups};

use crate::runner::{Effect, Pct};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("design is rank deficient: column '{column}' is a linear combination of {combination_of:?}")]
    RankDeficient { column: String, combination_of: Vec<String> },
    #[error("zero vector in similarity computation")]
    ZeroVector,
    #[error("review file {path}: {message}")]
    Review { path: PathBuf, message: String },
    #[error("reports are not comparable: {0}")]
    MetricMismatch(String),
    #[error(transparent)]
    Knowledge(#[from] crate::knowledge::KnowledgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Inflation,
    Unemployment,
}

impl Variable {
    pub const ALL: [Variable; 2] = [Variable::Inflation, Variable::Unemployment];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variable::Inflation => "inflation",
            Variable::Unemployment => "unemployment",
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Variable::Inflation => "π",
            Variable::Unemployment => "u",
        }
    }

    pub fn delta(&self, e: &Effect) -> Pct {
        match self {
            Variable::Inflation => e.d_inflation,
            Variable::Unemployment => e.d_unemployment,
        }
    }
}

/// Serializes maps with composite keys as lists of pairs, which JSON allows.
pub(crate) mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

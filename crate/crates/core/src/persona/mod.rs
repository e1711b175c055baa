//! Persona prompts.
//!
//! A household agent is the initialization instructions, a personal
//! characteristics slot (PCM) and a prior expectations slot (PEPM); an expert
//! agent is the initialization instructions (carrying its confidence), a
//! prior expectations slot and a knowledge slot (KAM) holding its retrieved
//! summary. The questionnaire follows as the last message. Every slot except
//! the questionnaire can be dropped for ablation runs.

mod template;
pub mod verbalize;

pub use template::{fill, Audience, PromptTemplate, Slot, TemplateSet};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::ChatMessage;
use crate::profiles::{ExpertProfile, HouseholdProfile};
use crate::{Scenario, Vignette, VignetteId};

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing template for ({audience}, {slot}): {path}")]
    MissingTemplate { audience: Audience, slot: Slot, path: PathBuf },
    #[error("template {template}, line {line}: {message}")]
    MalformedPlaceholder { template: String, line: usize, message: String },
    #[error("template {template}: unresolved placeholder {{{placeholder}}}")]
    UnresolvedPlaceholder { template: String, placeholder: String },
    #[error("expert {agent} has no knowledge summary but the knowledge slot is enabled")]
    MissingKnowledge { agent: String },
}

/// Slots removed from the rendered prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Households only.
    pub drop_pcm: bool,
    pub drop_pepm: bool,
    /// Experts only.
    pub drop_kam: bool,
    pub drop_initialization: bool,
}

impl AblationConfig {
    pub fn is_none(&self) -> bool {
        *self == Self::default()
    }

    /// Flags that have an effect for `audience`.
    pub fn for_audience(&self, audience: Audience) -> Self {
        match audience {
            Audience::Household => Self { drop_kam: false, ..*self },
            Audience::Expert => Self { drop_pcm: false, ..*self },
        }
    }

    /// Single-flag variants studied for each audience: without PCM, PEPM
    /// or initialization for households; without KAM, PEPM or initialization
    /// for experts.
    pub fn single_flag_variants(audience: Audience) -> Vec<AblationConfig> {
        let first = match audience {
            Audience::Household => Self { drop_pcm: true, ..Self::default() },
            Audience::Expert => Self { drop_kam: true, ..Self::default() },
        };
        vec![
            first,
            Self { drop_pepm: true, ..Self::default() },
            Self { drop_initialization: true, ..Self::default() },
        ]
    }

    /// Stable short name: `full`, `no_pcm`, `no_pepm+no_initialization`, ...
    pub fn slug(&self) -> String {
        let parts: Vec<&str> = [
            (self.drop_pcm, "no_pcm"),
            (self.drop_pepm, "no_pepm"),
            (self.drop_kam, "no_kam"),
            (self.drop_initialization, "no_initialization"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        if parts.is_empty() {
            "full".into()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for AblationConfig {
    /// Table label, e.g. "w/o PCM".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [
            (self.drop_pcm, "PCM"),
            (self.drop_pepm, "PEPM"),
            (self.drop_kam, "KAM"),
            (self.drop_initialization, "INITIAL"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        if parts.is_empty() {
            f.write_str("full")
        } else {
            write!(f, "w/o {}", parts.join(", "))
        }
    }
}

/// The complete message list for one agent, vignette and scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub agent_id: String,
    pub vignette: VignetteId,
    pub scenario: Scenario,
    pub messages: Vec<ChatMessage>,
    pub ablation: AblationConfig,
    /// Hex SHA-256 over all other fields.
    pub content_hash: String,
}

impl PromptBundle {
    fn new(
        agent_id: &str,
        vignette: &VignetteId,
        scenario: Scenario,
        messages: Vec<ChatMessage>,
        ablation: AblationConfig,
    ) -> Self {
        let payload = serde_json::to_string(&(agent_id, vignette, scenario, &messages, ablation))
            .expect("bundle serializes");
        Self {
            agent_id: agent_id.to_string(),
            vignette: vignette.clone(),
            scenario,
            messages,
            ablation,
            content_hash: hex::encode(Sha256::digest(payload.as_bytes())),
        }
    }

    /// All message contents joined, for string-level checks.
    pub fn full_text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n\n")
    }
}

/// Renders prompt bundles from a template set.
#[derive(Debug, Clone)]
pub struct Persona {
    templates: TemplateSet,
}

impl Default for Persona {
    fn default() -> Self {
        Self::new(TemplateSet::bundled())
    }
}

impl Persona {
    pub fn new(templates: TemplateSet) -> Self {
        Self { templates }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn slot(&self, audience: Audience, slot: Slot, values: &BTreeMap<&str, String>) -> Result<String, PersonaError> {
        self.templates.get(audience, slot).render(values)
    }

    /// The questionnaire message for `scenario`, optionally preceded by the
    /// vignette introduction.
    pub fn questionnaire(
        &self,
        audience: Audience,
        vignette: &Vignette,
        scenario: Scenario,
        with_introduction: bool,
    ) -> Result<ChatMessage, PersonaError> {
        let values = BTreeMap::from([("QUESTIONNAIRE", vignette.question_text(scenario, with_introduction))]);
        Ok(ChatMessage::user(self.slot(audience, Slot::Questionnaire, &values)?))
    }

    pub fn render_household(
        &self,
        profile: &HouseholdProfile,
        vignette: &Vignette,
        scenario: Scenario,
        ablation: AblationConfig,
    ) -> Result<PromptBundle, PersonaError> {
        let ablation = ablation.for_audience(Audience::Household);
        let a = Audience::Household;
        let mut messages = Vec::new();
        if !ablation.drop_initialization {
            messages.push(ChatMessage::system(self.slot(a, Slot::Initialization, &BTreeMap::new())?));
        }
        if !ablation.drop_pcm {
            messages.push(ChatMessage::user(self.slot(a, Slot::Pcm, &verbalize::household_pcm(profile))?));
        }
        if !ablation.drop_pepm {
            messages.push(ChatMessage::user(self.slot(a, Slot::Pepm, &verbalize::household_pepm(profile))?));
        }
        messages.push(self.questionnaire(a, vignette, scenario, true)?);
        Ok(PromptBundle::new(&profile.id, &vignette.id, scenario, messages, ablation))
    }

    pub fn render_expert(
        &self,
        profile: &ExpertProfile,
        vignette: &Vignette,
        scenario: Scenario,
        knowledge: Option<&str>,
        ablation: AblationConfig,
    ) -> Result<PromptBundle, PersonaError> {
        let ablation = ablation.for_audience(Audience::Expert);
        let a = Audience::Expert;
        let mut messages = Vec::new();
        if !ablation.drop_initialization {
            let values = verbalize::expert_initialization(profile);
            messages.push(ChatMessage::system(self.slot(a, Slot::Initialization, &values)?));
        }
        if !ablation.drop_pepm {
            messages.push(ChatMessage::user(self.slot(a, Slot::Pepm, &verbalize::expert_pepm(profile))?));
        }
        if !ablation.drop_kam {
            let knowledge = knowledge
                .filter(|k| !k.trim().is_empty())
                .ok_or_else(|| PersonaError::MissingKnowledge { agent: profile.id.clone() })?;
            let values = verbalize::expert_kam(profile, knowledge);
            messages.push(ChatMessage::user(self.slot(a, Slot::KamKnowledge, &values)?));
        }
        messages.push(self.questionnaire(a, vignette, scenario, true)?);
        Ok(PromptBundle::new(&profile.id, &vignette.id, scenario, messages, ablation))
    }
}

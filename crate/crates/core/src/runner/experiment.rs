//! Run manifests and the session loop.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::{format_reminder, parse_forecast, ParseError, ParsedForecast};
use super::record::{sort_records, ForecastRecord, RecordStatus};
use super::RunnerError;
use crate::backend::{BackendError, ChatBackend, ChatMessage, ChatRequest, DEFAULT_MAX_TOKENS};
use crate::persona::{AblationConfig, Audience, Persona, PersonaError, PromptBundle};
use crate::pool;
use crate::profiles::{assign_vignettes, Population, PopulationKind, Provenance};
use crate::rng::SeedTree;
use crate::{Scenario, Vignette, VignetteId, VignetteSet};

pub const DEFAULT_MAX_REASKS: u32 = 3;

/// Whether the shock question continues the baseline conversation or opens a
/// fresh one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationMode {
    #[default]
    Single,
    Separate,
}

/// How agents answering a vignette are divided between rise and fall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Seeded shuffle, first half rise, second half fall, an odd agent out
    /// decided by a seeded coin. Fixed across repeats.
    #[default]
    SeededBalanced,
}

/// Identifies a population used by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationRef {
    pub kind: PopulationKind,
    pub provenance: Provenance,
    pub size: usize,
    /// Hex SHA-256 of the population's JSON.
    pub content_hash: String,
}

impl PopulationRef {
    pub fn of(pop: &Population) -> Self {
        let json = serde_json::to_string(pop).expect("population serializes");
        Self {
            kind: pop.kind(),
            provenance: pop.provenance,
            size: pop.len(),
            content_hash: hex::encode(Sha256::digest(json.as_bytes())),
        }
    }
}

/// Everything that determines a run's record stream, given the same backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub seed: u64,
    pub repeats: u32,
    pub model: String,
    pub backend_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub ablation: AblationConfig,
    pub conversation: ConversationMode,
    pub split_rule: SplitRule,
    pub max_reasks: u32,
    pub vignettes: Vec<VignetteId>,
    pub populations: Vec<PopulationRef>,
}

impl RunManifest {
    pub fn new(seed: u64, model: impl Into<String>, backend_id: impl Into<String>) -> Self {
        Self {
            run_id: String::new(),
            seed,
            repeats: 1,
            model: model.into(),
            backend_id: backend_id.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            ablation: AblationConfig::default(),
            conversation: ConversationMode::default(),
            split_rule: SplitRule::default(),
            max_reasks: DEFAULT_MAX_REASKS,
            vignettes: VignetteId::standard(),
            populations: Vec::new(),
        }
    }

    /// Short content hash of every field except the run id.
    pub fn derived_run_id(&self) -> String {
        let mut m = self.clone();
        m.run_id.clear();
        let value = serde_json::to_value(&m).expect("manifest serializes");
        hex::encode(&Sha256::digest(value.to_string().as_bytes())[..6])
    }

    /// Sets the run id from the content hash if it is empty.
    pub fn with_derived_id(mut self) -> Self {
        if self.run_id.is_empty() {
            self.run_id = self.derived_run_id();
        }
        self
    }
}

/// Inputs for [`run_experiment`].
pub struct Experiment<'a> {
    pub manifest: &'a RunManifest,
    pub households: Option<&'a Population>,
    pub experts: Option<&'a Population>,
    pub vignettes: &'a VignetteSet,
    pub persona: &'a Persona,
    /// Knowledge summaries keyed by (expert id, vignette). Needed unless the
    /// knowledge component is ablated.
    pub knowledge: &'a BTreeMap<(String, VignetteId), String>,
    pub backend: &'a dyn ChatBackend,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Sorted by record key.
    pub records: Vec<ForecastRecord>,
    /// True when a backend failure stopped the run early.
    pub partial: bool,
    pub error: Option<String>,
    pub sessions_total: usize,
    pub sessions_completed: usize,
}

impl RunOutcome {
    pub fn parse_failures(&self) -> usize {
        self.records.iter().filter(|r| r.status == RecordStatus::ParseFailure).count()
    }

    /// Parse failures as a share of all records (0 when there are none).
    pub fn parse_failure_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.parse_failures() as f64 / self.records.len() as f64
        }
    }
}

/// Splits `agents` (already in population order) between rise and fall.
pub fn rise_fall_split(agents: &[&str], tree: SeedTree) -> BTreeMap<String, Scenario> {
    let mut order: Vec<&str> = agents.to_vec();
    let mut rng = tree.rng();
    order.shuffle(&mut rng);
    let half = order.len() / 2;
    let odd_is_rise = rng.random_bool(0.5);
    order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let rise = i < half || (i == 2 * half && odd_is_rise);
            (id.to_string(), if rise { Scenario::Rise } else { Scenario::Fall })
        })
        .collect()
}

struct Session<'a> {
    repeat: u32,
    kind: PopulationKind,
    agent_id: &'a str,
    vignette: &'a Vignette,
    shock: Scenario,
}

enum Abort {
    Backend(BackendError),
    Persona(PersonaError),
}

impl std::fmt::Display for Abort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Abort::Backend(e) => write!(f, "backend: {e}"),
            Abort::Persona(e) => write!(f, "persona: {e}"),
        }
    }
}

/// Answers for one question after re-asks.
struct Answer {
    parsed: Result<ParsedForecast, ParseError>,
    text: String,
    reasoning: Option<String>,
    attempts: u32,
}

impl Experiment<'_> {
    fn request(&self, messages: Vec<ChatMessage>, repeat: u32) -> ChatRequest {
        let m = self.manifest;
        ChatRequest {
            model: m.model.clone(),
            messages,
            temperature: m.temperature,
            max_tokens: m.max_tokens,
            sample_index: repeat,
        }
    }

    /// Asks once and re-asks with a format reminder until the reply parses
    /// or the re-ask budget is spent.
    fn ask(&self, mut messages: Vec<ChatMessage>, scenario: Scenario, repeat: u32) -> Result<Answer, Abort> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let (text, reasoning) = match self.backend.complete(&self.request(messages.clone(), repeat)) {
                Ok(r) => (r.text, r.reasoning_content),
                // An empty completion is a bad answer, not a dead backend.
                Err(BackendError::EmptyResponse) => (String::new(), None),
                Err(e) => return Err(Abort::Backend(e)),
            };
            let parsed = parse_forecast(&text, scenario);
            match &parsed {
                Err(e) if attempts <= self.manifest.max_reasks => {
                    log::debug!("re-asking after unusable reply: {e}");
                    messages.push(ChatMessage::assistant(text.clone()));
                    messages.push(ChatMessage::user(format_reminder(e, scenario)));
                }
                _ => return Ok(Answer { parsed, text, reasoning, attempts }),
            }
        }
    }

    fn bundle(&self, s: &Session, scenario: Scenario) -> Result<PromptBundle, PersonaError> {
        let ablation = self.manifest.ablation;
        match s.kind {
            PopulationKind::Household => {
                let p = self.households.and_then(|h| h.household(s.agent_id)).expect("session agent exists");
                self.persona.render_household(p, s.vignette, scenario, ablation)
            }
            PopulationKind::Expert => {
                let p = self.experts.and_then(|e| e.expert(s.agent_id)).expect("session agent exists");
                let knowledge = self.knowledge.get(&(p.id.clone(), s.vignette.id.clone())).map(String::as_str);
                self.persona.render_expert(p, s.vignette, scenario, knowledge, ablation)
            }
        }
    }

    fn record(&self, s: &Session, scenario: Scenario, answer: Option<&Answer>) -> ForecastRecord {
        let mut r = ForecastRecord {
            run_id: self.manifest.run_id.clone(),
            repeat: s.repeat,
            agent_id: s.agent_id.to_string(),
            kind: s.kind,
            vignette: s.vignette.id.clone(),
            scenario,
            status: RecordStatus::Skipped,
            inflation: None,
            unemployment: None,
            considerations: None,
            reasoning_content: None,
            response_hash: String::new(),
            attempts: 0,
            warnings: Vec::new(),
            error: Some("baseline answer unusable".into()),
        };
        let Some(a) = answer else { return r };
        r.response_hash = hex::encode(Sha256::digest(a.text.as_bytes()));
        r.attempts = a.attempts;
        r.reasoning_content = a.reasoning.clone();
        match &a.parsed {
            Ok(p) => {
                r.status = RecordStatus::Ok;
                r.inflation = Some(p.inflation);
                r.unemployment = Some(p.unemployment);
                r.considerations = p.considerations.clone();
                r.warnings = p.warnings.clone();
                r.error = None;
            }
            Err(e) => {
                r.status = RecordStatus::ParseFailure;
                r.error = Some(e.to_string());
            }
        }
        r
    }

    fn run_session(&self, s: &Session) -> Result<Vec<ForecastRecord>, Abort> {
        let baseline_bundle = self.bundle(s, Scenario::Baseline).map_err(Abort::Persona)?;
        let baseline = self.ask(baseline_bundle.messages.clone(), Scenario::Baseline, s.repeat)?;
        let baseline_record = self.record(s, Scenario::Baseline, Some(&baseline));
        if baseline.parsed.is_err() {
            return Ok(vec![baseline_record, self.record(s, s.shock, None)]);
        }
        let messages = match self.manifest.conversation {
            ConversationMode::Single => {
                let audience = match s.kind {
                    PopulationKind::Household => Audience::Household,
                    PopulationKind::Expert => Audience::Expert,
                };
                let mut m = baseline_bundle.messages;
                m.push(ChatMessage::assistant(baseline.text.clone()));
                m.push(self.persona.questionnaire(audience, s.vignette, s.shock, false).map_err(Abort::Persona)?);
                m
            }
            ConversationMode::Separate => self.bundle(s, s.shock).map_err(Abort::Persona)?.messages,
        };
        let shock = self.ask(messages, s.shock, s.repeat)?;
        Ok(vec![baseline_record, self.record(s, s.shock, Some(&shock))])
    }

    fn check_setup(&self) -> Result<(), RunnerError> {
        let m = self.manifest;
        if m.repeats == 0 {
            return Err(RunnerError::Setup("repeats must be at least 1".into()));
        }
        if self.households.is_none() && self.experts.is_none() {
            return Err(RunnerError::Setup("no population to survey".into()));
        }
        for (pop, kind) in [(self.households, PopulationKind::Household), (self.experts, PopulationKind::Expert)] {
            if pop.is_some_and(|p| p.kind() != kind) {
                return Err(RunnerError::Setup(format!("{kind} slot holds a different population kind")));
            }
        }
        for v in &m.vignettes {
            if self.vignettes.get(v).is_none() {
                return Err(RunnerError::Setup(format!("vignette '{v}' is not in the vignette set")));
            }
        }
        if let (Some(experts), false) = (self.experts, m.ablation.drop_kam) {
            for e in experts.experts() {
                for v in &m.vignettes {
                    if !self.knowledge.contains_key(&(e.id.clone(), v.clone())) {
                        return Err(PersonaError::MissingKnowledge { agent: format!("{} ({v})", e.id) }.into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs every (repeat, agent, vignette) session and collects the records.
///
/// A backend failure stops new sessions from starting; records of completed
/// sessions are returned with `partial` set.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutcome, RunnerError> {
    exp.check_setup()?;
    let m = exp.manifest;
    let tree = SeedTree::new(m.seed);
    let mut plan: Vec<(PopulationKind, String, &Vignette, Scenario)> = Vec::new();
    for pop in [exp.households, exp.experts].into_iter().flatten() {
        let assignment = assign_vignettes(pop, &m.vignettes, tree.child("assignment").seed())?;
        for vid in assignment.vignettes() {
            let agents = assignment.agents_for(vid);
            let split_tree = tree.child("split").child(pop.kind().as_str()).child(vid.as_str());
            let split = rise_fall_split(&agents, split_tree);
            let vignette = exp.vignettes.get(vid).expect("checked in setup");
            for agent in agents {
                plan.push((pop.kind(), agent.to_string(), vignette, split[agent]));
            }
        }
    }
    let sessions: Vec<Session> = (0..m.repeats)
        .flat_map(|repeat| {
            plan.iter().map(move |(kind, agent_id, vignette, shock)| Session {
                repeat,
                kind: *kind,
                agent_id,
                vignette,
                shock: *shock,
            })
        })
        .collect();
    log::info!("run {}: {} sessions over {} repeat(s)", m.run_id, sessions.len(), m.repeats);

    let results = pool::map_until(&sessions, exp.workers, |_, s| exp.run_session(s), Result::is_err);
    let mut records = Vec::with_capacity(sessions.len() * 2);
    let mut completed = 0;
    let mut error = None;
    for result in results.into_iter().flatten() {
        match result {
            Ok(r) => {
                completed += 1;
                records.extend(r);
            }
            Err(e) => {
                if error.is_none() {
                    log::error!("run aborted: {e}");
                    error = Some(e.to_string());
                }
            }
        }
    }
    sort_records(&mut records);
    Ok(RunOutcome {
        records,
        partial: error.is_some(),
        error,
        sessions_total: sessions.len(),
        sessions_completed: completed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_balanced_and_seeded() {
        let ids: Vec<String> = (0..9).map(|i| format!("a{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let a = rise_fall_split(&refs, SeedTree::new(1));
        assert_eq!(a, rise_fall_split(&refs, SeedTree::new(1)));
        let rise = a.values().filter(|s| **s == Scenario::Rise).count();
        assert!(rise == 4 || rise == 5);
        assert!(rise_fall_split(&[], SeedTree::new(1)).is_empty());
    }

    #[test]
    fn run_id_is_content_derived() {
        let m = RunManifest::new(7, "m", "mock").with_derived_id();
        assert_eq!(m.run_id.len(), 12);
        let mut other = RunManifest::new(8, "m", "mock");
        other.run_id.clear();
        assert_ne!(other.with_derived_id().run_id, m.run_id);
    }

    proptest::proptest! {
        #[test]
        fn split_imbalance_at_most_one(n in 0usize..60, seed in 0u64..1000) {
            let ids: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let s = rise_fall_split(&refs, SeedTree::new(seed));
            let rise = s.values().filter(|x| **x == Scenario::Rise).count() as i64;
            proptest::prop_assert_eq!(s.len(), n);
            proptest::prop_assert!((2 * rise - n as i64).abs() <= 1);
        }
    }
}

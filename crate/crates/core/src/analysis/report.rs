//! The full analysis pass, its on-disk bundle and ablation comparisons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::coding::{
    apply_mechanism_review, apply_response_type_review, code_mechanisms, code_response_types, write_mechanism_review,
    write_response_type_review, Channel, CodingStatus, MechanismCoding, RecordId, ResponseType, ResponseTypeCoding,
    ANY_MECHANISM,
};
use super::direction::{direction_table, display_percent, Cell, DirectionTable};
use super::distribution::{
    effect_distributions, histograms_csv, summaries_csv, uniform_edges, values_csv, EffectDistribution, QUANTILE_RULE,
};
use super::diversity::{lexical_diversity, repeat_similarity, semantic_diversity, LexicalDiversity, RepeatSimilarity};
use super::ols::{ols_robust, Design, RegressionResult, RobustKind};
use super::words::WordGroups;
use super::{pairs, AnalysisError, Variable};
use crate::backend::ChatBackend;
use crate::knowledge::Embedder;
use crate::profiles::PopulationKind;
use crate::runner::{effects_from_records, merge_fall_into_rise, Effect, ForecastRecord, Pct, RecordStatus};
use crate::{Scenario, VignetteId, VignetteSet};

type Group = (PopulationKind, VignetteId);

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// |Δ| at or below this is "no change".
    pub tolerance: Pct,
    pub histogram_edges: Vec<f64>,
    pub robust: RobustKind,
    pub word_groups: WordGroups,
    /// Repeat used for the per-run tables; defaults to the lowest present.
    pub repeat: Option<u32>,
    /// Pool every repeat into the per-run tables instead of using one.
    pub pool_repeats: bool,
    /// Human-review sheets whose `override` column replaces machine codes.
    pub response_type_review: Option<PathBuf>,
    pub mechanism_review: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tolerance: Pct(0),
            histogram_edges: uniform_edges(-5.0, 5.0, 40),
            robust: RobustKind::Hc1,
            word_groups: WordGroups::bundled(),
            repeat: None,
            pool_repeats: false,
            response_type_review: None,
            mechanism_review: None,
        }
    }
}

pub struct AnalysisInputs<'a> {
    pub records: &'a [ForecastRecord],
    pub vignettes: &'a VignetteSet,
    /// Backend and model for response-type and mechanism coding; coding and
    /// the regressions are skipped without one.
    pub coder: Option<(&'a dyn ChatBackend, &'a str)>,
    /// Embedder for semantic diversity and repeat similarity.
    pub embedder: Option<&'a dyn Embedder>,
    pub config: &'a AnalysisConfig,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismRegression {
    pub kind: PopulationKind,
    pub vignette: VignetteId,
    pub variable: Variable,
    /// 1: channel dummies; 2: channel dummies plus any_mechanism.
    pub specification: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<RegressionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    ReasoningContent,
    Considerations,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCell {
    pub documents: usize,
    pub mean_similarity: f64,
    pub score: f64,
    pub source: TextSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub label: String,
    /// Repeats feeding the per-run tables.
    pub repeats: Vec<u32>,
    pub records: usize,
    pub parse_failures: usize,
    pub quantile_rule: String,
    pub direction: DirectionTable,
    #[serde(with = "pairs")]
    pub distributions: BTreeMap<Cell, EffectDistribution>,
    pub response_types: Vec<ResponseTypeCoding>,
    /// Share of coded shock records in each category.
    #[serde(with = "pairs")]
    pub response_type_shares: BTreeMap<Group, BTreeMap<ResponseType, f64>>,
    pub mechanisms: Vec<MechanismCoding>,
    pub regressions: Vec<MechanismRegression>,
    /// Share of shock considerations mentioning each word group.
    #[serde(with = "pairs")]
    pub word_groups: BTreeMap<Group, BTreeMap<String, f64>>,
    #[serde(with = "pairs")]
    pub lexical: BTreeMap<Group, LexicalDiversity>,
    #[serde(with = "pairs")]
    pub semantic: BTreeMap<Group, SemanticCell>,
    #[serde(with = "pairs")]
    pub repeat_similarity: BTreeMap<Group, RepeatSimilarity>,
}

fn shares_of<K: Ord + Clone>(counts: &BTreeMap<K, usize>, n: usize) -> BTreeMap<K, f64> {
    counts.iter().map(|(k, c)| (k.clone(), *c as f64 / n as f64)).collect()
}

/// Runs every analysis over `inputs.records`.
pub fn analyze(inputs: &AnalysisInputs, label: &str) -> Result<Report, AnalysisError> {
    let cfg = inputs.config;
    let all_repeats: BTreeSet<u32> = inputs.records.iter().map(|r| r.repeat).collect();
    let repeats: Vec<u32> = if cfg.pool_repeats {
        all_repeats.iter().copied().collect()
    } else {
        match cfg.repeat.or_else(|| all_repeats.first().copied()) {
            Some(r) if all_repeats.contains(&r) => vec![r],
            Some(r) => return Err(AnalysisError::Invalid(format!("repeat {r} has no records"))),
            None => Vec::new(),
        }
    };
    let mut records: Vec<ForecastRecord> =
        inputs.records.iter().filter(|r| repeats.contains(&r.repeat)).cloned().collect();
    crate::runner::sort_records(&mut records);

    let effects = effects_from_records(&records);
    let merged = merge_fall_into_rise(&effects);
    let direction = direction_table(&merged, cfg.tolerance);
    let distributions = effect_distributions(&merged, &cfg.histogram_edges)?;

    let shocks: Vec<&ForecastRecord> = records.iter().filter(|r| r.is_ok() && r.scenario.is_shock()).collect();
    let mut groups: BTreeMap<Group, Vec<&ForecastRecord>> = BTreeMap::new();
    for r in &shocks {
        groups.entry((r.kind, r.vignette.clone())).or_default().push(r);
    }

    let (mut response_types, mut mechanisms) = (Vec::new(), Vec::new());
    if let Some((backend, model)) = inputs.coder {
        response_types = code_response_types(&records, inputs.vignettes, backend, model, inputs.workers);
        if let Some(path) = &cfg.response_type_review {
            let n = apply_response_type_review(&mut response_types, path)?;
            log::info!("applied {n} response-type review override(s)");
        }
        mechanisms = code_mechanisms(&records, &response_types, inputs.vignettes, backend, model, inputs.workers);
        if let Some(path) = &cfg.mechanism_review {
            let n = apply_mechanism_review(&mut mechanisms, path)?;
            log::info!("applied {n} mechanism review override(s)");
        }
    }
    let mut type_counts: BTreeMap<Group, (usize, BTreeMap<ResponseType, usize>)> = BTreeMap::new();
    for c in response_types.iter().filter(|c| c.status.is_coded()) {
        let entry = type_counts
            .entry((c.id.kind, c.id.vignette.clone()))
            .or_insert_with(|| (0, ResponseType::ALL.iter().map(|t| (*t, 0)).collect()));
        entry.0 += 1;
        for t in &c.types {
            *entry.1.get_mut(t).expect("all types listed") += 1;
        }
    }
    let response_type_shares = type_counts.into_iter().map(|(g, (n, c))| (g, shares_of(&c, n))).collect();
    let regressions = if inputs.coder.is_some() { mechanism_regressions(&effects, &mechanisms, cfg.robust) } else { Vec::new() };

    let mut word_groups = BTreeMap::new();
    let mut lexical = BTreeMap::new();
    let mut semantic = BTreeMap::new();
    for (g, rs) in &groups {
        let texts: Vec<&str> = rs.iter().filter_map(|r| r.considerations.as_deref()).collect();
        let mut counts: BTreeMap<String, usize> = cfg.word_groups.names().map(|n| (n.to_string(), 0)).collect();
        for t in &texts {
            for (name, hit) in cfg.word_groups.tags(t) {
                *counts.get_mut(&name).expect("group listed") += usize::from(hit);
            }
        }
        word_groups.insert(g.clone(), shares_of(&counts, texts.len().max(1)));
        if let Ok(l) = lexical_diversity(&texts) {
            lexical.insert(g.clone(), l);
        }
        if let Some(embedder) = inputs.embedder {
            let docs: Vec<(&str, bool)> = rs
                .iter()
                .filter_map(|r| match r.reasoning_content.as_deref().filter(|t| !t.trim().is_empty()) {
                    Some(t) => Some((t, true)),
                    None => r.considerations.as_deref().map(|c| (c, false)),
                })
                .collect();
            let reasoning = docs.iter().filter(|d| d.1).count();
            let source = match reasoning {
                0 => TextSource::Considerations,
                n if n == docs.len() => TextSource::ReasoningContent,
                _ => TextSource::Mixed,
            };
            let texts: Vec<&str> = docs.iter().map(|d| d.0).collect();
            match semantic_diversity(&texts, embedder) {
                Ok(s) => {
                    semantic.insert(
                        g.clone(),
                        SemanticCell { documents: s.documents, mean_similarity: s.mean_similarity, score: s.score, source },
                    );
                }
                Err(e) => log::warn!("semantic diversity for {} {}: {e}", g.0, g.1),
            }
        }
    }

    let repeat_similarity = match inputs.embedder {
        Some(embedder) if all_repeats.len() >= 2 => {
            repeat_similarity(inputs.records, &all_repeats.iter().copied().collect::<Vec<_>>(), embedder)?
        }
        _ => BTreeMap::new(),
    };

    Ok(Report {
        label: label.to_string(),
        repeats,
        records: records.len(),
        parse_failures: records.iter().filter(|r| r.status == RecordStatus::ParseFailure).count(),
        quantile_rule: QUANTILE_RULE.to_string(),
        direction,
        distributions,
        response_types,
        response_type_shares,
        mechanisms,
        regressions,
        word_groups,
        lexical,
        semantic,
        repeat_similarity,
    })
}

/// Regresses rise-scenario Δ on the vignette's mechanism dummies. Records
/// whose coding failed are left out; records not coded Mechanism enter with
/// all dummies zero.
fn mechanism_regressions(effects: &[Effect], codings: &[MechanismCoding], robust: RobustKind) -> Vec<MechanismRegression> {
    let by_id: BTreeMap<&RecordId, &MechanismCoding> = codings.iter().map(|c| (&c.id, c)).collect();
    let mut rows: BTreeMap<Group, Vec<(&Effect, &MechanismCoding)>> = BTreeMap::new();
    for e in effects.iter().filter(|e| e.scenario == Scenario::Rise) {
        let id = RecordId {
            repeat: e.repeat,
            kind: e.kind,
            vignette: e.vignette.clone(),
            agent_id: e.agent_id.clone(),
            scenario: e.scenario,
        };
        if let Some(c) = by_id.get(&id).filter(|c| c.status != CodingStatus::Failed) {
            rows.entry((e.kind, e.vignette.clone())).or_default().push((e, c));
        }
    }
    let mut out = Vec::new();
    for ((kind, vignette), rows) in rows {
        let channels = Channel::for_vignette(&vignette);
        for variable in Variable::ALL {
            for specification in [1u8, 2] {
                let y: Vec<f64> = rows.iter().map(|(e, _)| variable.delta(e).as_f64()).collect();
                let mut design = Design::with_intercept(rows.len());
                let mut names: Vec<&str> = channels.iter().map(Channel::name).collect();
                if specification == 2 {
                    names.push(ANY_MECHANISM);
                }
                for name in &names {
                    let col = rows.iter().map(|(_, c)| f64::from(c.dummy(name).unwrap_or(0))).collect();
                    design.push(*name, col).expect("column length matches");
                }
                let (result, error) = match ols_robust(&y, &design, robust) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                out.push(MechanismRegression { kind, vignette: vignette.clone(), variable, specification, result, error });
            }
        }
    }
    out
}

fn ordered_vignettes(groups: impl Iterator<Item = VignetteId>) -> Vec<VignetteId> {
    let present: BTreeSet<VignetteId> = groups.collect();
    let mut out: Vec<VignetteId> = VignetteId::standard().into_iter().filter(|v| present.contains(v)).collect();
    out.extend(present.into_iter().filter(|v| !VignetteId::standard().contains(v)));
    out
}

impl Report {
    pub fn vignettes(&self) -> Vec<VignetteId> {
        ordered_vignettes(self.direction.cells.keys().map(|c| c.1.clone()))
    }

    pub fn render_regressions(&self) -> String {
        let mut out = String::new();
        for r in &self.regressions {
            let _ = writeln!(
                out,
                "{} / {} / Δ{} / ({})",
                r.kind.plural_label(),
                r.vignette.display_name(),
                r.variable.symbol(),
                r.specification
            );
            match (&r.result, &r.error) {
                (Some(res), _) => {
                    for (i, name) in res.names.iter().enumerate() {
                        let label = Channel::parse(name).map_or(name.as_str(), |c| c.label());
                        let _ = writeln!(out, "  {label:<22} {:>9.3} ({:.3})", res.coefficients[i], res.std_errors[i]);
                    }
                    let _ = writeln!(out, "  {:<22} {:>9}", "Observations", res.n);
                    let _ = writeln!(out, "  {:<22} {:>9.3}", "R²", res.r_squared);
                }
                (None, Some(e)) => {
                    let _ = writeln!(out, "  not estimated: {e}");
                }
                _ => {}
            }
        }
        out
    }

    pub fn render_diversity(&self) -> String {
        let mut out = String::from("population,vignette,tokens,types,ttr,herdan,documents,semantic_score,semantic_source\n");
        let keys: BTreeSet<&Group> = self.lexical.keys().chain(self.semantic.keys()).collect();
        for g in keys {
            let l = self.lexical.get(g);
            let s = self.semantic.get(g);
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            let source = s.map_or(String::new(), |s| serde_json::to_value(s.source).expect("serializes").as_str().unwrap_or("").to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{source}",
                g.0,
                g.1,
                l.map_or(String::new(), |l| l.tokens.to_string()),
                l.map_or(String::new(), |l| l.types.to_string()),
                opt(l.map(|l| l.ttr)),
                opt(l.and_then(|l| l.herdan)),
                s.map_or(String::new(), |s| s.documents.to_string()),
                opt(s.map(|s| s.score)),
            );
        }
        out
    }

    fn regressions_csv(&self) -> String {
        let mut out = String::from("population,vignette,variable,specification,term,coefficient,std_error,n,r_squared,error\n");
        for r in &self.regressions {
            let v = r.variable.as_str();
            match &r.result {
                Some(res) => {
                    for (i, name) in res.names.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "{},{},{v},{},{name},{},{},{},{},",
                            r.kind, r.vignette, r.specification, res.coefficients[i], res.std_errors[i], res.n, res.r_squared
                        );
                    }
                }
                None => {
                    let e = r.error.as_deref().unwrap_or("").replace('"', "'");
                    let _ = writeln!(out, "{},{},{v},{},,,,,,\"{e}\"", r.kind, r.vignette, r.specification);
                }
            }
        }
        out
    }

    fn group_shares_csv<K: std::fmt::Display>(map: &BTreeMap<Group, BTreeMap<K, f64>>, column: &str) -> String {
        let mut out = format!("population,vignette,{column},share\n");
        for ((kind, v), shares) in map {
            for (k, s) in shares {
                let _ = writeln!(out, "{kind},{v},{k},{s}");
            }
        }
        out
    }

    fn repeat_similarity_csv(&self) -> String {
        let mut out = String::from("population,vignette,repeats,min_similarity,pair_a,pair_b,excluded\n");
        for ((kind, v), s) in &self.repeat_similarity {
            let excluded: Vec<String> = s.excluded.iter().map(u32::to_string).collect();
            let _ = writeln!(
                out,
                "{kind},{v},{},{},{},{},{}",
                s.repeats.len(),
                s.min_similarity,
                s.pair.0,
                s.pair.1,
                excluded.join(";")
            );
        }
        out
    }

    /// Plain-text overview of every section.
    pub fn render(&self) -> String {
        let mut out = format!(
            "Report: {}\nRepeats: {:?}\nRecords: {} ({} parse failures)\nQuantiles: {}\n\n",
            self.label, self.repeats, self.records, self.parse_failures, self.quantile_rule
        );
        out.push_str("Forecast directions (merged effects)\n");
        out.push_str(&self.direction.render(&self.vignettes()));
        if !self.distributions.is_empty() {
            out.push_str("Effect distributions\n");
            for ((kind, v, var), d) in &self.distributions {
                let s = &d.summary;
                let _ = writeln!(
                    out,
                    "  {kind} {v} Δ{}: n={} mean={:.3} sd={:.3} q05={:.2} q25={:.2} median={:.2} q75={:.2} q95={:.2}",
                    var.symbol(),
                    s.n,
                    s.mean,
                    s.sd,
                    s.quantiles[0],
                    s.quantiles[1],
                    s.quantiles[2],
                    s.quantiles[3],
                    s.quantiles[4]
                );
            }
            out.push('\n');
        }
        if !self.response_type_shares.is_empty() {
            out.push_str("Response types (share of coded answers)\n");
            for ((kind, v), shares) in &self.response_type_shares {
                let parts: Vec<String> =
                    shares.iter().filter(|(_, s)| **s > 0.0).map(|(t, s)| format!("{t} {}", display_percent(*s))).collect();
                let _ = writeln!(out, "  {kind} {v}: {}", parts.join(", "));
            }
            out.push('\n');
        }
        if !self.regressions.is_empty() {
            out.push_str("Mechanism regressions (rise scenarios)\n");
            out.push_str(&self.render_regressions());
            out.push('\n');
        }
        if !self.semantic.is_empty() {
            out.push_str("Semantic diversity\n");
            for ((kind, v), s) in &self.semantic {
                let _ = writeln!(out, "  {kind} {v}: {:.4} over {} documents", s.score, s.documents);
            }
            out.push('\n');
        }
        if !self.repeat_similarity.is_empty() {
            out.push_str("Minimum similarity across repeats\n");
            for ((kind, v), s) in &self.repeat_similarity {
                let _ = writeln!(out, "  {kind} {v}: {:.4} (repeats {} and {})", s.min_similarity, s.pair.0, s.pair.1);
            }
        }
        out
    }

    /// Writes the report bundle into `dir`. `records` supplies the answer
    /// text shown in the review sheets.
    pub fn write_bundle(&self, dir: &Path, records: &[ForecastRecord]) -> Result<(), AnalysisError> {
        std::fs::create_dir_all(dir).map_err(|source| AnalysisError::Io { path: dir.to_path_buf(), source })?;
        let files: Vec<(&str, String)> = vec![
            ("report.json", serde_json::to_string_pretty(self).expect("report serializes") + "\n"),
            ("summary.txt", self.render()),
            ("direction.txt", self.direction.render(&self.vignettes())),
            ("direction.csv", self.direction.to_csv()),
            ("distribution_summary.csv", summaries_csv(&self.distributions)),
            ("histograms.csv", histograms_csv(&self.distributions)),
            ("effects.csv", values_csv(&self.distributions)),
            ("regressions.txt", self.render_regressions()),
            ("regressions.csv", self.regressions_csv()),
            ("response_type_shares.csv", Self::group_shares_csv(&self.response_type_shares, "response_type")),
            ("word_groups.csv", Self::group_shares_csv(&self.word_groups, "group")),
            ("diversity.csv", self.render_diversity()),
            ("repeat_similarity.csv", self.repeat_similarity_csv()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| AnalysisError::Io { path, source })?;
        }
        if !self.response_types.is_empty() {
            write_response_type_review(&dir.join("review_response_types.csv"), &self.response_types, records)?;
        }
        if !self.mechanisms.is_empty() {
            write_mechanism_review(&dir.join("review_mechanisms.csv"), &self.mechanisms)?;
        }
        Ok(())
    }
}

/// One compared quantity: (baseline, ablated, ablated − baseline).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDelta {
    pub baseline: f64,
    pub ablated: f64,
    pub delta: f64,
}

impl CellDelta {
    fn new(baseline: f64, ablated: f64) -> Self {
        Self { baseline, ablated, delta: ablated - baseline }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDelta {
    pub baseline_label: String,
    pub ablated_label: String,
    /// Percentage points, keyed by cell then "fall" / "no_change" / "rise".
    #[serde(with = "pairs")]
    pub direction: BTreeMap<(Cell, String), CellDelta>,
    /// Keyed by cell then "mean" / "median".
    #[serde(with = "pairs")]
    pub distribution: BTreeMap<(Cell, String), CellDelta>,
    #[serde(with = "pairs")]
    pub response_types: BTreeMap<(Group, ResponseType), CellDelta>,
    #[serde(with = "pairs")]
    pub semantic: BTreeMap<Group, CellDelta>,
}

fn same_keys<K: Ord + std::fmt::Debug, A, B>(what: &str, a: &BTreeMap<K, A>, b: &BTreeMap<K, B>) -> Result<(), AnalysisError> {
    let ka: Vec<&K> = a.keys().collect();
    let kb: Vec<&K> = b.keys().collect();
    if ka != kb {
        return Err(AnalysisError::MetricMismatch(format!("{what} cells differ: {ka:?} vs {kb:?}")));
    }
    Ok(())
}

/// Signed differences between a baseline report and an ablated one.
pub fn ablation_compare(baseline: &Report, ablated: &Report) -> Result<AblationDelta, AnalysisError> {
    same_keys("direction", &baseline.direction.cells, &ablated.direction.cells)?;
    same_keys("distribution", &baseline.distributions, &ablated.distributions)?;
    same_keys("response type", &baseline.response_type_shares, &ablated.response_type_shares)?;
    same_keys("semantic diversity", &baseline.semantic, &ablated.semantic)?;

    let mut direction = BTreeMap::new();
    for (cell, b) in &baseline.direction.cells {
        let a = ablated.direction.cells[cell];
        let (bf, bs, br) = b.shares();
        let (af, as_, ar) = a.shares();
        for (name, x, y) in [("fall", bf, af), ("no_change", bs, as_), ("rise", br, ar)] {
            direction.insert((cell.clone(), name.to_string()), CellDelta::new(100.0 * x, 100.0 * y));
        }
    }
    let mut distribution = BTreeMap::new();
    for (cell, b) in &baseline.distributions {
        let a = &ablated.distributions[cell].summary;
        distribution.insert((cell.clone(), "mean".to_string()), CellDelta::new(b.summary.mean, a.mean));
        distribution.insert((cell.clone(), "median".to_string()), CellDelta::new(b.summary.median(), a.median()));
    }
    let mut response_types = BTreeMap::new();
    for (g, b) in &baseline.response_type_shares {
        for (t, x) in b {
            let y = ablated.response_type_shares[g].get(t).copied().unwrap_or(0.0);
            response_types.insert((g.clone(), *t), CellDelta::new(*x, y));
        }
    }
    let semantic = baseline
        .semantic
        .iter()
        .map(|(g, b)| (g.clone(), CellDelta::new(b.score, ablated.semantic[g].score)))
        .collect();
    Ok(AblationDelta {
        baseline_label: baseline.label.clone(),
        ablated_label: ablated.label.clone(),
        direction,
        distribution,
        response_types,
        semantic,
    })
}

impl AblationDelta {
    /// Direction shares side by side with signed percentage-point changes,
    /// then semantic diversity at four decimals.
    pub fn render(&self) -> String {
        let mut out = format!("{} vs {}\n\nForecast directions (rise share, pp)\n", self.baseline_label, self.ablated_label);
        for (((kind, v, var), name), d) in &self.direction {
            if name == "rise" {
                let _ = writeln!(
                    out,
                    "  {:<9} {:<20} {}: {:>4} -> {:>4} ({:+.0}pp)",
                    kind.as_str(),
                    v.display_name(),
                    var.symbol(),
                    display_percent(d.baseline / 100.0),
                    display_percent(d.ablated / 100.0),
                    d.delta
                );
            }
        }
        if !self.semantic.is_empty() {
            out.push_str("\nSemantic diversity\n");
            for ((kind, v), d) in &self.semantic {
                let _ = writeln!(
                    out,
                    "  {:<9} {:<20} {:.4} -> {:.4} ({:+.4})",
                    kind.as_str(),
                    v.display_name(),
                    d.baseline,
                    d.ablated,
                    d.delta
                );
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,population,vignette,variable,metric,baseline,ablated,delta\n");
        for (((kind, v, var), m), d) in &self.direction {
            let _ = writeln!(out, "direction,{kind},{v},{},{m},{},{},{}", var.as_str(), d.baseline, d.ablated, d.delta);
        }
        for (((kind, v, var), m), d) in &self.distribution {
            let _ = writeln!(out, "distribution,{kind},{v},{},{m},{},{},{}", var.as_str(), d.baseline, d.ablated, d.delta);
        }
        for (((kind, v), t), d) in &self.response_types {
            let _ = writeln!(out, "response_type,{kind},{v},,{t},{},{},{}", d.baseline, d.ablated, d.delta);
        }
        for ((kind, v), d) in &self.semantic {
            let _ = writeln!(out, "semantic,{kind},{v},,score,{},{},{}", d.baseline, d.ablated, d.delta);
        }
        out
    }
}

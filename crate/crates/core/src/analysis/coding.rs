//! LLM coding of open-text considerations: response types and propagation
//! mechanisms, plus the human-review round trip.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::backend::{ChatBackend, ChatMessage, ChatRequest};
use crate::knowledge::word_tokens;
use crate::persona::fill;
use crate::pool;
use crate::profiles::PopulationKind;
use crate::runner::ForecastRecord;
use crate::{Scenario, VignetteId, VignetteSet};

/// Key of the record a coding belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordId {
    pub repeat: u32,
    pub kind: PopulationKind,
    pub vignette: VignetteId,
    pub agent_id: String,
    pub scenario: Scenario,
}

impl From<&ForecastRecord> for RecordId {
    fn from(r: &ForecastRecord) -> Self {
        Self {
            repeat: r.repeat,
            kind: r.kind,
            vignette: r.vignette.clone(),
            agent_id: r.agent_id.clone(),
            scenario: r.scenario,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseType {
    Mechanism,
    Model,
    Guess,
    Politics,
    Historical,
    Misunderstanding,
    RestatesPrediction,
    EndogenousShock,
    Other,
}

impl ResponseType {
    pub const ALL: [ResponseType; 9] = [
        ResponseType::Mechanism,
        ResponseType::Model,
        ResponseType::Guess,
        ResponseType::Politics,
        ResponseType::Historical,
        ResponseType::Misunderstanding,
        ResponseType::RestatesPrediction,
        ResponseType::EndogenousShock,
        ResponseType::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ResponseType::Mechanism => "Mechanism",
            ResponseType::Model => "Model",
            ResponseType::Guess => "Guess",
            ResponseType::Politics => "Politics",
            ResponseType::Historical => "Historical",
            ResponseType::Misunderstanding => "Misunderstanding",
            ResponseType::RestatesPrediction => "Restates prediction",
            ResponseType::EndogenousShock => "Endogenous shock",
            ResponseType::Other => "Other",
        }
    }

    /// Accepts labels in any case with spaces, underscores or hyphens.
    pub fn parse(s: &str) -> Option<Self> {
        let norm = |x: &str| x.trim().to_lowercase().replace(['_', '-'], " ");
        let s = norm(s);
        Self::ALL.into_iter().find(|t| norm(t.label()) == s)
    }
}

impl fmt::Display for ResponseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodingStatus {
    Coded,
    /// Not sent to the coder (no text, or not eligible).
    Skipped,
    /// The coder failed or replied in an unusable form; the record is uncoded.
    Failed,
    /// Codes replaced in the human review pass.
    Reviewed,
}

impl CodingStatus {
    pub fn is_coded(&self) -> bool {
        matches!(self, CodingStatus::Coded | CodingStatus::Reviewed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseTypeCoding {
    pub id: RecordId,
    pub types: BTreeSet<ResponseType>,
    pub status: CodingStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Parses a `Categories: a, b` reply. Unknown names are reported back.
pub fn parse_categories(reply: &str) -> Option<(BTreeSet<ResponseType>, Vec<String>)> {
    let line = reply.lines().find_map(|l| {
        let l = l.trim().trim_start_matches(['*', '-', ' ']);
        l.get(..11).filter(|h| h.eq_ignore_ascii_case("categories:")).map(|_| &l[11..])
    })?;
    let mut types = BTreeSet::new();
    let mut unknown = Vec::new();
    for name in line.split([',', ';']).map(|n| n.trim().trim_matches(['*', '"', '.'])).filter(|n| !n.is_empty()) {
        match ResponseType::parse(name) {
            Some(t) => {
                types.insert(t);
            }
            None => unknown.push(name.to_string()),
        }
    }
    (!types.is_empty()).then_some((types, unknown))
}

fn ask(backend: &dyn ChatBackend, model: &str, prompt: String) -> Result<String, String> {
    backend
        .complete(&ChatRequest::new(model, vec![ChatMessage::user(prompt)]))
        .map(|r| r.text)
        .map_err(|e| e.to_string())
}

fn coding_prompt(asset: &str, values: &BTreeMap<&str, String>) -> Result<String, String> {
    let body = crate::assets::get(asset).ok_or_else(|| format!("missing asset {asset}"))?;
    fill(asset, body, values).map_err(|e| e.to_string())
}

fn shock_records(records: &[ForecastRecord]) -> Vec<&ForecastRecord> {
    let mut out: Vec<&ForecastRecord> = records.iter().filter(|r| r.is_ok() && r.scenario.is_shock()).collect();
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    out
}

/// Codes the considerations of every usable shock record. Failures flag the
/// record as uncoded instead of aborting. Output follows record-key order.
pub fn code_response_types(
    records: &[ForecastRecord],
    vignettes: &VignetteSet,
    backend: &dyn ChatBackend,
    model: &str,
    workers: usize,
) -> Vec<ResponseTypeCoding> {
    let shocks = shock_records(records);
    pool::map(&shocks, workers, |_, r| {
        let mut coding =
            ResponseTypeCoding { id: RecordId::from(*r), types: BTreeSet::new(), status: CodingStatus::Failed, note: None };
        let Some(text) = r.considerations.as_deref().filter(|c| !c.trim().is_empty()) else {
            coding.status = CodingStatus::Skipped;
            coding.note = Some("empty considerations".into());
            return coding;
        };
        let Some(vignette) = vignettes.get(&r.vignette) else {
            coding.note = Some(format!("unknown vignette '{}'", r.vignette));
            return coding;
        };
        let values = BTreeMap::from([
            ("QUESTIONNAIRE", vignette.question_text(r.scenario, true)),
            ("RESPONSE", text.to_string()),
        ]);
        let reply = coding_prompt("coding/response_types.txt", &values).and_then(|p| ask(backend, model, p));
        match reply {
            Err(e) => coding.note = Some(e),
            Ok(reply) => match parse_categories(&reply) {
                Some((types, unknown)) => {
                    coding.types = types;
                    coding.status = CodingStatus::Coded;
                    if !unknown.is_empty() {
                        coding.note = Some(format!("ignored unknown categories: {}", unknown.join(", ")));
                    }
                }
                None => coding.note = Some(format!("unparseable reply: {}", reply.trim())),
            },
        }
        coding
    })
}

/// A mechanism dummy of the regression design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    FirmsCostsPlus,
    ProductDemandMinus,
    ProductDemandPlus,
    LaborDemandMinus,
    LaborDemandPlus,
    OilDependencyMinus,
    CrowdingOut,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::FirmsCostsPlus,
        Channel::ProductDemandMinus,
        Channel::ProductDemandPlus,
        Channel::LaborDemandMinus,
        Channel::LaborDemandPlus,
        Channel::OilDependencyMinus,
        Channel::CrowdingOut,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::FirmsCostsPlus => "firms_costs_plus",
            Channel::ProductDemandMinus => "product_demand_minus",
            Channel::ProductDemandPlus => "product_demand_plus",
            Channel::LaborDemandMinus => "labor_demand_minus",
            Channel::LaborDemandPlus => "labor_demand_plus",
            Channel::OilDependencyMinus => "oil_dependency_minus",
            Channel::CrowdingOut => "crowding_out",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Channel::FirmsCostsPlus => "Firms' costs (+)",
            Channel::ProductDemandMinus => "Product demand (-)",
            Channel::ProductDemandPlus => "Product demand (+)",
            Channel::LaborDemandMinus => "Labor demand (-)",
            Channel::LaborDemandPlus => "Labor demand (+)",
            Channel::OilDependencyMinus => "Oil dependency (-)",
            Channel::CrowdingOut => "Crowding out",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s.trim()))
    }

    /// The dummies regressed for a vignette. Unknown vignettes get none.
    pub fn for_vignette(vignette: &VignetteId) -> &'static [Channel] {
        use Channel::*;
        match vignette.as_str() {
            VignetteId::OIL_PRICE => &[FirmsCostsPlus, ProductDemandMinus, LaborDemandMinus, OilDependencyMinus],
            VignetteId::GOVERNMENT_SPENDING => &[CrowdingOut, ProductDemandPlus, LaborDemandPlus],
            VignetteId::FEDERAL_FUNDS_RATE | VignetteId::INCOME_TAXES => {
                &[FirmsCostsPlus, ProductDemandMinus, LaborDemandMinus]
            }
            _ => &[],
        }
    }
}

pub const ANY_MECHANISM: &str = "any_mechanism";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeDirection {
    Up,
    Down,
    NoChange,
    Ambiguous,
}

/// One "variable direction" line of a mechanism coding reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismCode {
    pub variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<CodeDirection>,
}

/// Codes that explain why a shock does not matter rather than naming a
/// variable.
const REASON_CODES: &[&str] = &["minor", "none", "temporary", "small", "no effect", "no major effect", "n/a"];

impl MechanismCode {
    pub fn parse(line: &str) -> Option<Self> {
        let line = line.trim().trim_start_matches(['-', '*', '•']).trim().trim_matches('"');
        if line.is_empty() {
            return None;
        }
        let (variable, direction) = match line.rsplit_once(char::is_whitespace) {
            Some((v, d)) => match d {
                "+" => (v, Some(CodeDirection::Up)),
                "-" | "−" | "–" => (v, Some(CodeDirection::Down)),
                "o" | "0" => (v, Some(CodeDirection::NoChange)),
                "±" | "+/-" => (v, Some(CodeDirection::Ambiguous)),
                _ => (line, None),
            },
            None => (line, None),
        };
        Some(Self { variable: variable.trim().to_lowercase(), direction })
    }

    pub fn is_reason(&self) -> bool {
        REASON_CODES.contains(&self.variable.as_str())
    }

    /// The channel this code points to, if any, before restricting to a
    /// vignette's set.
    pub fn channel(&self) -> Option<Channel> {
        let tokens: Vec<String> = word_tokens(&self.variable).collect();
        let has = |stems: &[&str]| tokens.iter().any(|t| stems.iter().any(|s| t.starts_with(s)));
        let is = |words: &[&str]| tokens.iter().any(|t| words.contains(&t.as_str()));
        let dir = self.direction?;
        let (up, down) = (dir == CodeDirection::Up, dir == CodeDirection::Down);
        if has(&["crowd"]) {
            return (!down && dir != CodeDirection::NoChange).then_some(Channel::CrowdingOut);
        }
        if is(&["oil"]) && has(&["dependen", "reliance"]) {
            return down.then_some(Channel::OilDependencyMinus);
        }
        if is(&["unemployment", "layoffs", "layoff"]) {
            return match dir {
                CodeDirection::Up => Some(Channel::LaborDemandMinus),
                CodeDirection::Down => Some(Channel::LaborDemandPlus),
                _ => None,
            };
        }
        if is(&["labor", "labour", "employment", "hiring", "jobs", "workers"]) {
            return if up { Some(Channel::LaborDemandPlus) } else { down.then_some(Channel::LaborDemandMinus) };
        }
        if has(&["cost"]) && !is(&["households", "household", "consumers", "consumer", "living"]) {
            return up.then_some(Channel::FirmsCostsPlus);
        }
        if is(&["demand", "consumption", "sales", "purchases", "investment", "spending"]) && !is(&["government"]) {
            return if up { Some(Channel::ProductDemandPlus) } else { down.then_some(Channel::ProductDemandMinus) };
        }
        None
    }
}

/// Parses a reply headed `Codes:`; `None` if the heading is missing.
pub fn parse_mechanism_codes(reply: &str) -> Option<Vec<MechanismCode>> {
    let mut lines = reply.lines();
    let first = lines.by_ref().find(|l| l.trim().trim_matches('*').to_lowercase().starts_with("codes:"))?;
    let inline = first.trim().trim_matches('*')[6..].trim();
    let mut codes: Vec<MechanismCode> = inline.split(';').filter_map(MechanismCode::parse).collect();
    codes.extend(lines.filter_map(MechanismCode::parse));
    Some(codes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismCoding {
    pub id: RecordId,
    pub codes: Vec<MechanismCode>,
    /// One entry per channel of the vignette's set.
    pub dummies: BTreeMap<Channel, u8>,
    pub any_mechanism: u8,
    pub status: CodingStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MechanismCoding {
    fn empty(id: RecordId, status: CodingStatus, note: Option<String>) -> Self {
        let dummies = Channel::for_vignette(&id.vignette).iter().map(|c| (*c, 0)).collect();
        Self { id, codes: Vec::new(), dummies, any_mechanism: 0, status, note }
    }

    /// Sets the dummies from `codes`. Any variable code counts toward
    /// any_mechanism, so it is never below a channel dummy.
    pub fn consolidate(&mut self) {
        let allowed = Channel::for_vignette(&self.id.vignette);
        for v in self.dummies.values_mut() {
            *v = 0;
        }
        for c in self.codes.iter().filter_map(MechanismCode::channel).filter(|c| allowed.contains(c)) {
            self.dummies.insert(c, 1);
        }
        let any = self.codes.iter().any(|c| !c.is_reason()) || self.dummies.values().any(|&d| d == 1);
        self.any_mechanism = u8::from(any);
    }

    pub fn dummy(&self, name: &str) -> Option<u8> {
        if name == ANY_MECHANISM {
            return Some(self.any_mechanism);
        }
        Channel::parse(name).and_then(|c| self.dummies.get(&c).copied())
    }
}

/// Codes mechanisms for rise records. Records whose considerations were not
/// coded as Mechanism get all-zero dummies without a backend call.
pub fn code_mechanisms(
    records: &[ForecastRecord],
    response_types: &[ResponseTypeCoding],
    vignettes: &VignetteSet,
    backend: &dyn ChatBackend,
    model: &str,
    workers: usize,
) -> Vec<MechanismCoding> {
    let types: BTreeMap<&RecordId, &ResponseTypeCoding> = response_types.iter().map(|c| (&c.id, c)).collect();
    let rise: Vec<&ForecastRecord> = shock_records(records).into_iter().filter(|r| r.scenario == Scenario::Rise).collect();
    pool::map(&rise, workers, |_, r| {
        let id = RecordId::from(*r);
        let mechanism = types.get(&id).is_some_and(|t| t.status.is_coded() && t.types.contains(&ResponseType::Mechanism));
        if !mechanism {
            return MechanismCoding::empty(id, CodingStatus::Skipped, Some("not coded Mechanism".into()));
        }
        let Some(vignette) = vignettes.get(&r.vignette) else {
            return MechanismCoding::empty(id, CodingStatus::Failed, Some(format!("unknown vignette '{}'", r.vignette)));
        };
        let asset = match r.kind {
            PopulationKind::Household => "coding/mechanisms_household.txt",
            PopulationKind::Expert => "coding/mechanisms_expert.txt",
        };
        let values = BTreeMap::from([
            ("QUESTIONNAIRE", vignette.question_text(r.scenario, true)),
            ("SHOCK", format!("{} ({})", vignette.id.display_name(), r.scenario)),
            ("RESPONSE", r.considerations.clone().unwrap_or_default()),
        ]);
        match coding_prompt(asset, &values).and_then(|p| ask(backend, model, p)) {
            Err(e) => MechanismCoding::empty(id, CodingStatus::Failed, Some(e)),
            Ok(reply) => match parse_mechanism_codes(&reply) {
                None => MechanismCoding::empty(id, CodingStatus::Failed, Some(format!("unparseable reply: {}", reply.trim()))),
                Some(codes) => {
                    let mut c = MechanismCoding::empty(id, CodingStatus::Coded, None);
                    c.codes = codes;
                    c.consolidate();
                    c
                }
            },
        }
    })
}

const REVIEW_KEY: [&str; 5] = ["repeat", "population", "vignette", "agent_id", "scenario"];

fn key_fields(id: &RecordId) -> [String; 5] {
    [id.repeat.to_string(), id.kind.to_string(), id.vignette.to_string(), id.agent_id.clone(), id.scenario.to_string()]
}

fn review_io(path: &Path) -> impl Fn(csv::Error) -> AnalysisError + '_ {
    move |e| AnalysisError::Review { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes the response-type review sheet: record key, machine codes, the
/// considerations text and an empty `override` column. Overrides are
/// semicolon-separated category names.
pub fn write_response_type_review(
    path: &Path,
    codings: &[ResponseTypeCoding],
    records: &[ForecastRecord],
) -> Result<(), AnalysisError> {
    let text: BTreeMap<RecordId, &str> =
        records.iter().map(|r| (RecordId::from(r), r.considerations.as_deref().unwrap_or(""))).collect();
    let err = review_io(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(REVIEW_KEY.iter().chain(&["status", "machine_codes", "considerations", "override"])).map_err(&err)?;
    for c in codings {
        let codes: Vec<&str> = c.types.iter().map(ResponseType::label).collect();
        let status = serde_json::to_value(c.status).expect("status serializes");
        let mut row = key_fields(&c.id).to_vec();
        row.extend([
            status.as_str().unwrap_or_default().to_string(),
            codes.join(";"),
            text.get(&c.id).copied().unwrap_or("").to_string(),
            String::new(),
        ]);
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|source| AnalysisError::Io { path: path.to_path_buf(), source })
}

/// Writes the mechanism review sheet. Overrides list the dummies to set
/// (channel names and/or `any_mechanism`), or `none` to clear them all.
pub fn write_mechanism_review(path: &Path, codings: &[MechanismCoding]) -> Result<(), AnalysisError> {
    let err = review_io(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(REVIEW_KEY.iter().chain(&["status", "raw_codes", "machine_codes", "override"])).map_err(&err)?;
    for c in codings {
        let raw: Vec<String> = c
            .codes
            .iter()
            .map(|m| match m.direction {
                Some(d) => format!("{} {}", m.variable, match d {
                    CodeDirection::Up => "+",
                    CodeDirection::Down => "-",
                    CodeDirection::NoChange => "o",
                    CodeDirection::Ambiguous => "±",
                }),
                None => m.variable.clone(),
            })
            .collect();
        let mut set: Vec<&str> = c.dummies.iter().filter(|(_, v)| **v == 1).map(|(k, _)| k.name()).collect();
        if c.any_mechanism == 1 {
            set.push(ANY_MECHANISM);
        }
        let status = serde_json::to_value(c.status).expect("status serializes");
        let mut row = key_fields(&c.id).to_vec();
        row.extend([status.as_str().unwrap_or_default().to_string(), raw.join(";"), set.join(";"), String::new()]);
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|source| AnalysisError::Io { path: path.to_path_buf(), source })
}

/// Non-empty overrides from a review sheet, keyed by record.
fn read_overrides(path: &Path) -> Result<BTreeMap<RecordId, String>, AnalysisError> {
    let err = review_io(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let headers = r.headers().map_err(&err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| AnalysisError::Review {
            path: path.to_path_buf(),
            message: format!("missing column '{name}'"),
        })
    };
    let key_cols = REVIEW_KEY.iter().map(|k| col(k)).collect::<Result<Vec<_>, _>>()?;
    let override_col = col("override")?;
    let mut out = BTreeMap::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(&err)?;
        let value = row.get(override_col).unwrap_or("").trim();
        if value.is_empty() {
            continue;
        }
        let bad = |m: String| AnalysisError::Review { path: path.to_path_buf(), message: format!("row {}: {m}", line + 2) };
        let f = |i: usize| row.get(key_cols[i]).unwrap_or("");
        let id = RecordId {
            repeat: f(0).parse().map_err(|_| bad(format!("bad repeat '{}'", f(0))))?,
            kind: serde_json::from_value(serde_json::Value::String(f(1).into()))
                .map_err(|_| bad(format!("bad population '{}'", f(1))))?,
            vignette: VignetteId::new(f(2)),
            agent_id: f(3).to_string(),
            scenario: f(4).parse().map_err(bad)?,
        };
        out.insert(id, value.to_string());
    }
    Ok(out)
}

/// Applies reviewer overrides; returns how many codings changed status.
pub fn apply_response_type_review(codings: &mut [ResponseTypeCoding], path: &Path) -> Result<usize, AnalysisError> {
    let overrides = read_overrides(path)?;
    let mut applied = 0;
    for c in codings.iter_mut() {
        let Some(value) = overrides.get(&c.id) else { continue };
        let mut types = BTreeSet::new();
        for name in value.split(';').map(str::trim).filter(|n| !n.is_empty()) {
            types.insert(ResponseType::parse(name).ok_or_else(|| AnalysisError::Review {
                path: path.to_path_buf(),
                message: format!("unknown category '{name}' for {}", c.id.agent_id),
            })?);
        }
        c.types = types;
        c.status = CodingStatus::Reviewed;
        applied += 1;
    }
    Ok(applied)
}

pub fn apply_mechanism_review(codings: &mut [MechanismCoding], path: &Path) -> Result<usize, AnalysisError> {
    let overrides = read_overrides(path)?;
    let mut applied = 0;
    for c in codings.iter_mut() {
        let Some(value) = overrides.get(&c.id) else { continue };
        for v in c.dummies.values_mut() {
            *v = 0;
        }
        c.any_mechanism = 0;
        for name in value.split(';').map(str::trim).filter(|n| !n.is_empty() && !n.eq_ignore_ascii_case("none")) {
            if name == ANY_MECHANISM {
                c.any_mechanism = 1;
                continue;
            }
            let channel = Channel::parse(name).filter(|ch| c.dummies.contains_key(ch)).ok_or_else(|| {
                AnalysisError::Review {
                    path: path.to_path_buf(),
                    message: format!("'{name}' is not a dummy of vignette '{}'", c.id.vignette),
                }
            })?;
            c.dummies.insert(channel, 1);
            c.any_mechanism = 1;
        }
        c.status = CodingStatus::Reviewed;
        applied += 1;
    }
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_parsing() {
        let (t, unknown) = parse_categories("Categories: Mechanism, guess, restates_prediction, Weather").unwrap();
        assert_eq!(t, BTreeSet::from([ResponseType::Mechanism, ResponseType::Guess, ResponseType::RestatesPrediction]));
        assert_eq!(unknown, vec!["Weather".to_string()]);
        assert!(parse_categories("I think it is Mechanism").is_none());
        assert!(parse_categories("Categories: ").is_none());
        assert_eq!(parse_categories("**Categories:** Other").unwrap().0, BTreeSet::from([ResponseType::Other]));
    }

    #[test]
    fn code_parsing_and_channels() {
        let codes = parse_mechanism_codes("Codes:\ncosts borrowing firms +\ndemand households -\nlabor demand -\nminor").unwrap();
        assert_eq!(codes.len(), 4);
        assert_eq!(codes[0].channel(), Some(Channel::FirmsCostsPlus));
        assert_eq!(codes[1].channel(), Some(Channel::ProductDemandMinus));
        assert_eq!(codes[2].channel(), Some(Channel::LaborDemandMinus));
        assert!(codes[3].is_reason() && codes[3].channel().is_none());
        assert_eq!(MechanismCode::parse("crowding out +").unwrap().channel(), Some(Channel::CrowdingOut));
        assert_eq!(MechanismCode::parse("oil dependency −").unwrap().channel(), Some(Channel::OilDependencyMinus));
        assert_eq!(MechanismCode::parse("unemployment +").unwrap().channel(), Some(Channel::LaborDemandMinus));
        assert_eq!(MechanismCode::parse("costs households +").unwrap().channel(), None);
        assert_eq!(MechanismCode::parse("costs firms").unwrap().channel(), None);
        assert!(parse_mechanism_codes("Codes:\nnone").unwrap()[0].is_reason());
        assert!(parse_mechanism_codes("nothing here").is_none());
    }

    fn coding(vignette: &str, codes: &str) -> MechanismCoding {
        let id = RecordId {
            repeat: 0,
            kind: PopulationKind::Expert,
            vignette: VignetteId::new(vignette),
            agent_id: "e".into(),
            scenario: Scenario::Rise,
        };
        let mut c = MechanismCoding::empty(id, CodingStatus::Coded, None);
        c.codes = parse_mechanism_codes(codes).unwrap();
        c.consolidate();
        c
    }

    #[test]
    fn consolidation_respects_vignette_sets() {
        let c = coding(VignetteId::FEDERAL_FUNDS_RATE, "Codes:\ncosts borrowing firms +");
        assert_eq!((c.dummy("firms_costs_plus"), c.any_mechanism), (Some(1), 1));
        let c = coding(VignetteId::GOVERNMENT_SPENDING, "Codes:\ncrowding out +\ncosts firms +");
        assert_eq!(c.dummy("crowding_out"), Some(1));
        assert_eq!(c.dummy("firms_costs_plus"), None);
        let c = coding(VignetteId::OIL_PRICE, "Codes:\nnone");
        assert!(c.dummies.values().all(|&d| d == 0));
        assert_eq!(c.any_mechanism, 0);
        assert_eq!(c.dummies.len(), 4);
    }

    proptest::proptest! {
        #[test]
        fn any_mechanism_dominates(lines in proptest::collection::vec(
            proptest::sample::select(vec![
                "costs firms +", "demand -", "demand +", "labor demand -", "labor demand +", "oil dependency -",
                "crowding out +", "minor", "none", "prices +", "unemployment -",
            ]), 0..6),
            v in proptest::sample::select(VignetteId::standard()),
        ) {
            let c = coding(v.as_str(), &format!("Codes:\n{}", lines.join("\n")));
            for d in c.dummies.values() {
                proptest::prop_assert!(*d <= 1 && c.any_mechanism >= *d);
            }
        }
    }
}

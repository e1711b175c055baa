//! Prompt templates with `{UPPERCASE}` placeholders.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PersonaError;
use crate::assets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Household,
    Expert,
}

impl Audience {
    pub fn as_str(&self) -> &'static str {
        match self {
            Audience::Household => "household",
            Audience::Expert => "expert",
        }
    }

    /// Slots a complete template directory must provide for this audience.
    pub fn slots(&self) -> &'static [Slot] {
        match self {
            Audience::Household => &[Slot::Initialization, Slot::Pcm, Slot::Pepm, Slot::Questionnaire],
            Audience::Expert => &[Slot::Initialization, Slot::Pepm, Slot::KamKnowledge, Slot::Questionnaire],
        }
    }
}

impl fmt::Display for Audience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Initialization,
    Pcm,
    Pepm,
    KamKnowledge,
    Questionnaire,
}

impl Slot {
    pub fn as_str(&self) -> &'static str {
        match self {
            Slot::Initialization => "initialization",
            Slot::Pcm => "pcm",
            Slot::Pepm => "pepm",
            Slot::KamKnowledge => "kam_knowledge",
            Slot::Questionnaire => "questionnaire",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Placeholder(String),
}

/// A parsed template body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub audience: Audience,
    pub slot: Slot,
    pub body: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    /// Parses `body`, ignoring trailing whitespace. A `{` must open a placeholder of uppercase letters,
    /// digits and underscores, starting with a letter, closed by `}`.
    pub fn parse(audience: Audience, slot: Slot, body: &str) -> Result<Self, PersonaError> {
        let id = format!("{audience}/{slot}");
        let body = body.trim_end();
        let pieces = parse_pieces(body).map_err(|(line, message)| PersonaError::MalformedPlaceholder {
            template: id.clone(),
            line,
            message,
        })?;
        Ok(Self { id, audience, slot, body: body.to_string(), pieces })
    }

    /// Distinct placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for piece in &self.pieces {
            if let Piece::Placeholder(name) = piece {
                if !names.contains(&name.as_str()) {
                    names.push(name);
                }
            }
        }
        names
    }

    /// Substitutes every placeholder; any name missing from `values` is an
    /// error.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, PersonaError> {
        let mut out = String::with_capacity(self.body.len());
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Placeholder(name) => match values.get(name.as_str()) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(PersonaError::UnresolvedPlaceholder {
                            template: self.id.clone(),
                            placeholder: name.clone(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// Parses and renders a one-off prompt body (knowledge and coding prompts).
pub fn fill(id: &str, body: &str, values: &BTreeMap<&str, String>) -> Result<String, PersonaError> {
    let pieces = parse_pieces(body).map_err(|(line, message)| PersonaError::MalformedPlaceholder {
        template: id.to_string(),
        line,
        message,
    })?;
    let mut out = String::with_capacity(body.len());
    for piece in pieces {
        match piece {
            Piece::Text(t) => out.push_str(&t),
            Piece::Placeholder(name) => match values.get(name.as_str()) {
                Some(v) => out.push_str(v),
                None => {
                    return Err(PersonaError::UnresolvedPlaceholder { template: id.to_string(), placeholder: name })
                }
            },
        }
    }
    Ok(out)
}

fn parse_pieces(body: &str) -> Result<Vec<Piece>, (usize, String)> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let line = body[..body.len() - rest.len() + open].matches('\n').count() + 1;
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or((line, "unclosed '{'".to_string()))?;
        let name = &after[..close];
        let valid = name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
            && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
        if !valid {
            return Err((line, format!("invalid placeholder '{{{name}}}'")));
        }
        if !text.is_empty() {
            pieces.push(Piece::Text(std::mem::take(&mut text)));
        }
        pieces.push(Piece::Placeholder(name.to_string()));
        rest = &after[close + 1..];
    }
    text.push_str(rest);
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    Ok(pieces)
}

/// One template per (audience, slot).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<(Audience, Slot), PromptTemplate>,
}

impl TemplateSet {
    /// The default templates compiled into the crate.
    pub fn bundled() -> Self {
        let mut templates = BTreeMap::new();
        for audience in [Audience::Household, Audience::Expert] {
            for slot in audience.slots() {
                let path = format!("templates/{audience}/{slot}.txt");
                let body = assets::get(&path).expect("bundled template present");
                let t = PromptTemplate::parse(audience, *slot, body).expect("bundled template parses");
                templates.insert((audience, *slot), t);
            }
        }
        Self { templates }
    }

    /// Loads `<dir>/<audience>/<slot>.txt` for every required slot.
    pub fn load(dir: &Path) -> Result<Self, PersonaError> {
        let mut templates = BTreeMap::new();
        for audience in [Audience::Household, Audience::Expert] {
            for slot in audience.slots() {
                let path: PathBuf = dir.join(audience.as_str()).join(format!("{slot}.txt"));
                if !path.is_file() {
                    return Err(PersonaError::MissingTemplate { audience, slot: *slot, path });
                }
                let body =
                    std::fs::read_to_string(&path).map_err(|source| PersonaError::Io { path: path.clone(), source })?;
                templates.insert((audience, *slot), PromptTemplate::parse(audience, *slot, &body)?);
            }
        }
        Ok(Self { templates })
    }

    pub fn get(&self, audience: Audience, slot: Slot) -> &PromptTemplate {
        &self.templates[&(audience, slot)]
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    /// Replaces one template, e.g. for tests or custom experiments.
    pub fn with(mut self, template: PromptTemplate) -> Self {
        self.templates.insert((template.audience, template.slot), template);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_placeholders_in_order() {
        let t = PromptTemplate::parse(Audience::Household, Slot::Pcm, "{AGE}-year-old {SEX}, {AGE}").unwrap();
        assert_eq!(t.placeholders(), vec!["AGE", "SEX"]);
        let values = BTreeMap::from([("AGE", "52".to_string()), ("SEX", "woman".to_string())]);
        assert_eq!(t.render(&values).unwrap(), "52-year-old woman, 52");
    }

    #[test]
    fn malformed_placeholder_reports_line() {
        let err = PromptTemplate::parse(Audience::Expert, Slot::Pepm, "ok\nstill ok\nbad {lower} here").unwrap_err();
        match err {
            PersonaError::MalformedPlaceholder { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(PromptTemplate::parse(Audience::Expert, Slot::Pepm, "open {AGE").is_err());
        assert!(PromptTemplate::parse(Audience::Expert, Slot::Pepm, "{}").is_err());
    }

    #[test]
    fn unresolved_placeholder_named() {
        let t = PromptTemplate::parse(Audience::Household, Slot::Pcm, "x {UNKNOWN} y").unwrap();
        let err = t.render(&BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("UNKNOWN"));
    }

    #[test]
    fn bundled_set_is_complete() {
        let set = TemplateSet::bundled();
        assert_eq!(set.len(), 8);
        assert_eq!(set.get(Audience::Expert, Slot::Initialization).placeholders(), vec!["CONF"]);
    }

    #[test]
    fn load_round_trips_exported_assets() {
        let dir = tempfile::tempdir().unwrap();
        assets::export(dir.path()).unwrap();
        let loaded = TemplateSet::load(&dir.path().join("templates")).unwrap();
        assert_eq!(loaded, TemplateSet::bundled());
    }

    #[test]
    fn missing_slot_named() {
        let dir = tempfile::tempdir().unwrap();
        assets::export(dir.path()).unwrap();
        let root = dir.path().join("templates");
        std::fs::remove_file(root.join("household/initialization.txt")).unwrap();
        let err = TemplateSet::load(&root).unwrap_err();
        assert!(err.to_string().contains("(household, initialization)"), "{err}");
    }
}

//! Extraction of the labeled answer lines from a model reply.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::record::Pct;
use super::{INFLATION_BOUNDS, UNEMPLOYMENT_BOUNDS};
use crate::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty response")]
    Empty,
    #[error("no \"{0}\" line found")]
    MissingLabel(&'static str),
    #[error("{label} value '{raw}' is not a number")]
    Number { label: &'static str, raw: String },
    #[error("{label} {value}% is outside [{min}%, {max}%]")]
    Bounds { label: &'static str, value: Pct, min: Pct, max: Pct },
    #[error("no \"Main considerations\" text found")]
    MissingConsiderations,
}

impl ParseError {
    pub fn is_bounds(&self) -> bool {
        matches!(self, ParseError::Bounds { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedForecast {
    pub inflation: Pct,
    pub unemployment: Pct,
    /// Present exactly for shock scenarios.
    pub considerations: Option<String>,
    pub warnings: Vec<String>,
}

const INFLATION_LABEL: &str = "Inflation rate";
const UNEMPLOYMENT_LABEL: &str = "Unemployment rate";

// Label, optional parenthesized tag, optional markdown emphasis, colon, number.
fn value_regex(label: &str) -> Regex {
    Regex::new(&format!(
        r"(?i){}\s*(?:\([^)\n]*\))?[\s*_]*[:：][\s*_]*(?P<num>[+\-−–]?\s*(?:\d+(?:\.\d*)?|\.\d+))?",
        label.replace(' ', r"\s+")
    ))
    .expect("static regex")
}

static INFLATION_RE: LazyLock<Regex> = LazyLock::new(|| value_regex(INFLATION_LABEL));
static UNEMPLOYMENT_RE: LazyLock<Regex> = LazyLock::new(|| value_regex(UNEMPLOYMENT_LABEL));
static CONSIDERATIONS_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?is)main\s+considerations\s*(?:\([^)\n]*\))?[\s*_]*[:：][\s*_]*(?P<text>.*)$").expect("static regex")
});

/// Parses a decimal string into hundredths, rounding half away from zero.
/// Returns whether rounding dropped nonzero digits.
fn parse_hundredths(raw: &str) -> Option<(i64, bool)> {
    let cleaned: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let (negative, digits) = match cleaned.chars().next()? {
        '-' | '−' | '–' => (true, &cleaned[cleaned.char_indices().nth(1)?.0..]),
        '+' => (false, &cleaned[1..]),
        _ => (false, cleaned.as_str()),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac = frac.as_bytes();
    let digit = |i: usize| frac.get(i).map_or(0, |b| i64::from(b - b'0'));
    let mut h = int.checked_mul(100)?.checked_add(digit(0) * 10 + digit(1))?;
    let quantized = frac.len() > 2 && frac[2..].iter().any(|&b| b != b'0');
    if digit(2) >= 5 {
        h += 1;
    }
    Some((if negative { -h } else { h }, quantized))
}

fn extract(
    re: &Regex,
    label: &'static str,
    text: &str,
    bounds: (i64, i64),
    warnings: &mut Vec<String>,
) -> Result<Pct, ParseError> {
    // The last labeled line wins: replies often restate the form before answering.
    let caps = re.captures_iter(text).last().ok_or(ParseError::MissingLabel(label))?;
    let raw = caps.name("num").map(|m| m.as_str()).unwrap_or("");
    let (h, quantized) = parse_hundredths(raw).ok_or_else(|| ParseError::Number { label, raw: raw.to_string() })?;
    let value = Pct(h);
    if quantized {
        warnings.push(format!("{label} '{}' rounded to {value}", raw.trim()));
    }
    if h < bounds.0 || h > bounds.1 {
        return Err(ParseError::Bounds { label, value, min: Pct(bounds.0), max: Pct(bounds.1) });
    }
    Ok(value)
}

fn clean_considerations(raw: &str) -> String {
    raw.trim().trim_matches(|c: char| c == '*' || c == '_' || c.is_whitespace()).to_string()
}

/// Extracts the two forecasts and, for shock scenarios, the considerations.
pub fn parse_forecast(text: &str, scenario: Scenario) -> Result<ParsedForecast, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut warnings = Vec::new();
    let inflation = extract(&INFLATION_RE, INFLATION_LABEL, text, INFLATION_BOUNDS, &mut warnings)?;
    let unemployment = extract(&UNEMPLOYMENT_RE, UNEMPLOYMENT_LABEL, text, UNEMPLOYMENT_BOUNDS, &mut warnings)?;
    let considerations = if scenario.is_shock() {
        let text = CONSIDERATIONS_RE
            .captures(text)
            .map(|c| clean_considerations(&c["text"]))
            .filter(|t| !t.is_empty())
            .ok_or(ParseError::MissingConsiderations)?;
        Some(text)
    } else {
        None
    };
    Ok(ParsedForecast { inflation, unemployment, considerations, warnings })
}

/// The reminder appended after an unusable reply.
pub fn format_reminder(error: &ParseError, scenario: Scenario) -> String {
    let tag = scenario.answer_tag();
    let mut form = format!(
        "Inflation rate ({tag}): ___% {}\nUnemployment rate ({tag}): ___% {}",
        crate::vignette::INFLATION_BOUNDS_LINE,
        crate::vignette::UNEMPLOYMENT_BOUNDS_LINE
    );
    if scenario.is_shock() {
        form.push_str("\nMain considerations (alternative):");
    }
    format!("Your previous answer could not be used ({error}). Please answer again in exactly the following form:\n{form}")
}

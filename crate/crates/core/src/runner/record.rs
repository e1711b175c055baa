//! Forecast records and their persistence.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RunnerError;
use crate::profiles::PopulationKind;
use crate::{Scenario, VignetteId};

/// A percentage held as integer hundredths, so two-decimal answers and their
/// differences are exact. Serialized as a decimal number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pct(pub i64);

impl Pct {
    pub fn from_hundredths(h: i64) -> Self {
        Pct(h)
    }

    /// Rounds to the nearest hundredth.
    pub fn from_f64(x: f64) -> Self {
        Pct((x * 100.0).round() as i64)
    }

    pub fn hundredths(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::ops::Sub for Pct {
    type Output = Pct;
    fn sub(self, rhs: Pct) -> Pct {
        Pct(self.0 - rhs.0)
    }
}

impl std::ops::Neg for Pct {
    type Output = Pct;
    fn neg(self) -> Pct {
        Pct(-self.0)
    }
}

impl fmt::Display for Pct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{:02}", self.0.abs() / 100, self.0.abs() % 100)
    }
}

impl Serialize for Pct {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Pct {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        if !x.is_finite() {
            return Err(serde::de::Error::custom("non-finite percentage"));
        }
        Ok(Pct::from_f64(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    /// No usable answer after every re-ask.
    ParseFailure,
    /// Not asked because the baseline answer in the same conversation failed.
    Skipped,
}

/// One answered (or failed) questionnaire scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub run_id: String,
    pub repeat: u32,
    pub agent_id: String,
    pub kind: PopulationKind,
    pub vignette: VignetteId,
    pub scenario: Scenario,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflation: Option<Pct>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unemployment: Option<Pct>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub considerations: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_content: Option<String>,
    /// Hex SHA-256 of the final raw response text ("" if none).
    pub response_hash: String,
    /// Backend calls made for this scenario, re-asks included.
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Sort key shared by persistence and analysis.
pub type RecordKey<'a> = (u32, PopulationKind, &'a VignetteId, &'a str, Scenario);

impl ForecastRecord {
    pub fn key(&self) -> RecordKey<'_> {
        (self.repeat, self.kind, &self.vignette, &self.agent_id, self.scenario)
    }

    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }

    /// Checks the stored fields against the record invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.is_ok() {
            let pi = self.inflation.ok_or("missing inflation")?;
            let u = self.unemployment.ok_or("missing unemployment")?;
            if !(super::INFLATION_BOUNDS.0..=super::INFLATION_BOUNDS.1).contains(&pi.0) {
                return Err(format!("inflation {pi} out of bounds"));
            }
            if !(super::UNEMPLOYMENT_BOUNDS.0..=super::UNEMPLOYMENT_BOUNDS.1).contains(&u.0) {
                return Err(format!("unemployment {u} out of bounds"));
            }
            if self.scenario.is_shock() != self.considerations.is_some() {
                return Err("considerations must be present exactly for shock scenarios".into());
            }
        }
        Ok(())
    }
}

pub fn sort_records(records: &mut [ForecastRecord]) {
    records.sort_by(|a, b| a.key().cmp(&b.key()));
}

/// Writes records sorted by key, one JSON object per line.
pub fn save_records(path: &Path, records: &[ForecastRecord]) -> Result<(), RunnerError> {
    let io = |source| RunnerError::Io { path: path.to_path_buf(), source };
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in &sorted {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn load_records(path: &Path) -> Result<Vec<ForecastRecord>, RunnerError> {
    let io = |source| RunnerError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ForecastRecord = serde_json::from_str(&line).map_err(|e| RunnerError::RecordFile {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| RunnerError::RecordFile { path: path.to_path_buf(), line: i + 1, message })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pct_display_and_arithmetic() {
        assert_eq!(Pct(350).to_string(), "3.50");
        assert_eq!(Pct(-5).to_string(), "-0.05");
        assert_eq!(Pct(-200).to_string(), "-2.00");
        assert_eq!((Pct(350) - Pct(290)).0, 60);
        assert_eq!(Pct::from_f64(2.9).0, 290);
    }

    proptest::proptest! {
        #[test]
        fn pct_json_round_trip(h in -100_000i64..100_000) {
            let json = serde_json::to_string(&Pct(h)).unwrap();
            proptest::prop_assert_eq!(serde_json::from_str::<Pct>(&json).unwrap(), Pct(h));
        }
    }
}

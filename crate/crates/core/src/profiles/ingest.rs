//! Delimited-text ingestion of household and forecaster rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::category::{Category, Direction, Education, IncomeBand, Marital, PoliticalAffiliation, Region, Sex, Trend};
use super::{ExpertBase, HouseholdProfile, Members, Population, ProfileError, Provenance, UnemploymentPrior};

/// Maps household fields onto header names of the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseholdColumns {
    pub id: String,
    pub age: String,
    pub sex: String,
    pub marital: String,
    pub education: String,
    pub region: String,
    pub political_affiliation: String,
    pub income_band: String,
    pub prior_inflation: String,
    pub prior_unemployment: String,
    /// Whether the unemployment prior column holds a direction (1/3/5 or
    /// more/same/less) or a percent forecast.
    pub prior_unemployment_is_percent: bool,
    pub prior_rates: Option<String>,
}

impl Default for HouseholdColumns {
    fn default() -> Self {
        Self {
            id: "ID".into(),
            age: "AGE".into(),
            sex: "SEX".into(),
            marital: "MARRY".into(),
            education: "EDUC".into(),
            region: "REGION".into(),
            political_affiliation: "POLAFF".into(),
            income_band: "YTL5".into(),
            prior_inflation: "PX1".into(),
            prior_unemployment: "UNEMP".into(),
            prior_unemployment_is_percent: false,
            prior_rates: Some("RATEX".into()),
        }
    }
}

/// Maps forecaster fields onto header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertBaseColumns {
    pub pce_trend: String,
    pub unemployment_trend: String,
}

impl Default for ExpertBaseColumns {
    fn default() -> Self {
        Self { pce_trend: "PCE".into(), unemployment_trend: "UNEMP".into() }
    }
}

/// Rows read, kept, and dropped per offending column.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub rows_read: usize,
    pub kept: usize,
    /// First invalid column of each dropped row, counted.
    pub dropped_by_column: BTreeMap<String, usize>,
}

impl DropReport {
    pub fn dropped_count(&self) -> usize {
        self.dropped_by_column.values().sum()
    }

    fn drop_row(&mut self, column: &str) {
        *self.dropped_by_column.entry(column.to_string()).or_default() += 1;
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows_read\t{}", self.rows_read);
        let _ = writeln!(out, "kept\t{}", self.kept);
        let _ = writeln!(out, "dropped\t{}", self.dropped_count());
        for (column, count) in &self.dropped_by_column {
            let _ = writeln!(out, "dropped[{column}]\t{count}");
        }
        out
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path, delimiter: u8) -> Result<Table, ProfileError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    let rows = reader.records().collect::<Result<Vec<_>, _>>().map_err(|e| csv_error(path, e))?;
    Ok(Table { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> ProfileError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => ProfileError::Io { path: path.to_path_buf(), source },
        other => ProfileError::Malformed { path: path.to_path_buf(), message: format!("{other:?}") },
    }
}

fn locate(path: &Path, header: &[String], wanted: &[&str]) -> Result<Vec<usize>, ProfileError> {
    let mut missing = Vec::new();
    let positions = wanted
        .iter()
        .map(|name| {
            header.iter().position(|h| h == name).unwrap_or_else(|| {
                missing.push(name.to_string());
                usize::MAX
            })
        })
        .collect();
    if missing.is_empty() {
        Ok(positions)
    } else {
        Err(ProfileError::MissingColumns { path: path.to_path_buf(), missing })
    }
}

/// Reads households from a delimited file with a header row.
///
/// Rows with a blank or invalid value in any mapped column are dropped and
/// counted by the first offending column. A duplicate id among kept rows is
/// an error, as is an empty result.
pub fn ingest_households(
    path: &Path,
    columns: &HouseholdColumns,
    delimiter: u8,
) -> Result<(Population, DropReport), ProfileError> {
    let table = read_table(path, delimiter)?;
    let mut wanted: Vec<&str> = vec![
        &columns.id,
        &columns.age,
        &columns.sex,
        &columns.marital,
        &columns.education,
        &columns.region,
        &columns.political_affiliation,
        &columns.income_band,
        &columns.prior_inflation,
        &columns.prior_unemployment,
    ];
    if let Some(rates) = &columns.prior_rates {
        wanted.push(rates);
    }
    let pos = locate(path, &table.header, &wanted)?;

    let mut report = DropReport { rows_read: table.rows.len(), ..Default::default() };
    let mut members = Vec::new();
    let mut seen = BTreeSet::new();
    for row in &table.rows {
        let cell = |i: usize| row.get(pos[i]).unwrap_or("").trim();
        match parse_household(&cell, columns) {
            Ok(profile) => {
                if !seen.insert(profile.id.clone()) {
                    return Err(ProfileError::DuplicateId(profile.id));
                }
                members.push(profile);
            }
            Err(column) => report.drop_row(column),
        }
    }
    report.kept = members.len();
    if members.is_empty() {
        return Err(ProfileError::NoValidRows { report });
    }
    Ok((Population::new(Members::Household(members), Provenance::Ingested)?, report))
}

fn parse_household<'c>(
    cell: &dyn Fn(usize) -> &'c str,
    columns: &'c HouseholdColumns,
) -> Result<HouseholdProfile, &'c str> {
    fn cat<T: Category>(raw: &str) -> Option<T> {
        T::parse(raw)
    }
    let id = Some(cell(0)).filter(|s| !s.is_empty()).ok_or(columns.id.as_str())?;
    let age = cell(1).parse::<u32>().ok().filter(|a| *a > 0).ok_or(columns.age.as_str())?;
    let sex = cat::<Sex>(cell(2)).ok_or(columns.sex.as_str())?;
    let marital = cat::<Marital>(cell(3)).ok_or(columns.marital.as_str())?;
    let education = cat::<Education>(cell(4)).ok_or(columns.education.as_str())?;
    let region = cat::<Region>(cell(5)).ok_or(columns.region.as_str())?;
    let political_affiliation = cat::<PoliticalAffiliation>(cell(6)).ok_or(columns.political_affiliation.as_str())?;
    let income_band = cat::<IncomeBand>(cell(7)).ok_or(columns.income_band.as_str())?;
    let prior_inflation_expectation =
        cell(8).parse::<f64>().ok().filter(|x| x.is_finite()).ok_or(columns.prior_inflation.as_str())?;
    let prior_unemployment_expectation = if columns.prior_unemployment_is_percent {
        cell(9).parse::<f64>().ok().filter(|x| x.is_finite()).map(UnemploymentPrior::Percent)
    } else {
        Direction::parse_survey(cell(9)).map(UnemploymentPrior::Direction)
    }
    .ok_or(columns.prior_unemployment.as_str())?;
    let prior_rates_expectation = match &columns.prior_rates {
        Some(name) if !cell(10).is_empty() => Some(Direction::parse_survey(cell(10)).ok_or(name.as_str())?),
        _ => None,
    };
    Ok(HouseholdProfile {
        id: id.to_string(),
        age,
        sex,
        marital,
        education,
        region,
        political_affiliation,
        income_band,
        prior_inflation_expectation,
        prior_unemployment_expectation,
        prior_rates_expectation,
    })
}

/// Reads forecaster prior-trend rows.
pub fn ingest_expert_base(
    path: &Path,
    columns: &ExpertBaseColumns,
    delimiter: u8,
) -> Result<(Vec<ExpertBase>, DropReport), ProfileError> {
    let table = read_table(path, delimiter)?;
    let pos = locate(path, &table.header, &[&columns.pce_trend, &columns.unemployment_trend])?;
    let mut report = DropReport { rows_read: table.rows.len(), ..Default::default() };
    let mut base = Vec::new();
    for row in &table.rows {
        let cell = |i: usize| row.get(pos[i]).unwrap_or("").trim();
        match (Trend::parse(cell(0)), Trend::parse(cell(1))) {
            (Some(pce_trend), Some(unemployment_trend)) => base.push(ExpertBase { pce_trend, unemployment_trend }),
            (None, _) => report.drop_row(&columns.pce_trend),
            (_, None) => report.drop_row(&columns.unemployment_trend),
        }
    }
    report.kept = base.len();
    if base.is_empty() {
        return Err(ProfileError::NoValidRows { report });
    }
    Ok((base, report))
}

//! The questionnaire procedure: per (agent, vignette) a baseline question
//! followed by one shock question, parsed into forecast records.

mod effects;
mod experiment;
mod parse;
mod record;

use std::path::PathBuf;

use thiserror::Error;

pub use effects::{effects_from_records, merge_fall_into_rise, perceived_effect, Effect};
pub use experiment::{
    rise_fall_split, run_experiment, ConversationMode, Experiment, PopulationRef, RunManifest, RunOutcome, SplitRule,
    DEFAULT_MAX_REASKS,
};
pub use parse::{format_reminder, parse_forecast, ParseError, ParsedForecast};
pub use record::{load_records, save_records, sort_records, ForecastRecord, Pct, RecordKey, RecordStatus};

/// Inclusive inflation bounds in hundredths of a percent.
pub const INFLATION_BOUNDS: (i64, i64) = (-200, 800);
/// Inclusive unemployment bounds in hundredths of a percent.
pub const UNEMPLOYMENT_BOUNDS: (i64, i64) = (0, 1000);

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    RecordFile { path: PathBuf, line: usize, message: String },
    #[error("cannot pair effect records: {0}")]
    EffectMismatch(String),
    #[error("run setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Profile(#[from] crate::profiles::ProfileError),
    #[error(transparent)]
    Persona(#[from] crate::persona::PersonaError),
}

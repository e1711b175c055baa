//! Command-line driver: construction, runs, analysis, ablation and
//! pre-estimation over a single TOML configuration.

pub mod commands;
pub mod config;
pub mod layout;
pub mod wiring;

use clues_core::analysis::AnalysisError;
use clues_core::backend::BackendError;
use clues_core::knowledge::KnowledgeError;
use clues_core::persona::PersonaError;
use clues_core::profiles::ProfileError;
use clues_core::runner::RunnerError;
use clues_core::vignette::VignetteError;

pub use config::{BackendKind, Overrides, RunConfig};

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const BACKEND: u8 = 4;
    pub const PARSE_THRESHOLD: u8 = 5;
    pub const VALIDATION: u8 = 6;
}

/// Failures raised by the driver itself, each tied to an exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("{0}")]
    Usage(String),
    #[error("run incomplete after {completed} of {total} sessions: {message}")]
    Partial { completed: usize, total: usize, message: String },
    #[error("parse failure rate {rate:.4} exceeds the threshold {threshold:.4}")]
    ParseThreshold { rate: f64, threshold: f64 },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Usage(_) => exit::USAGE,
            CliError::Partial { .. } => exit::BACKEND,
            CliError::ParseThreshold { .. } => exit::PARSE_THRESHOLD,
        }
    }
}

/// Exit status for an error: the first cause in the chain that maps to a
/// status decides, anything unrecognized is an I/O-class failure.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain().find_map(classify).unwrap_or(exit::IO)
}

fn classify(e: &(dyn std::error::Error + 'static)) -> Option<u8> {
    if let Some(e) = e.downcast_ref::<CliError>() {
        return Some(e.code());
    }
    if e.downcast_ref::<BackendError>().is_some() {
        return Some(exit::BACKEND);
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return Some(exit::IO);
    }
    if let Some(e) = e.downcast_ref::<KnowledgeError>() {
        return Some(knowledge_code(e));
    }
    if let Some(e) = e.downcast_ref::<ProfileError>() {
        return Some(profile_code(e));
    }
    if let Some(e) = e.downcast_ref::<PersonaError>() {
        return Some(persona_code(e));
    }
    if let Some(e) = e.downcast_ref::<VignetteError>() {
        return Some(match e {
            VignetteError::Io { .. } => exit::IO,
            VignetteError::Unknown(_) => exit::CONFIG,
            _ => exit::VALIDATION,
        });
    }
    if let Some(e) = e.downcast_ref::<RunnerError>() {
        return Some(match e {
            RunnerError::Io { .. } => exit::IO,
            RunnerError::Setup(_) => exit::CONFIG,
            RunnerError::Profile(p) => profile_code(p),
            RunnerError::Persona(p) => persona_code(p),
            _ => exit::VALIDATION,
        });
    }
    if let Some(e) = e.downcast_ref::<AnalysisError>() {
        return Some(match e {
            AnalysisError::Io { .. } => exit::IO,
            AnalysisError::Knowledge(k) => knowledge_code(k),
            _ => exit::VALIDATION,
        });
    }
    None
}

fn knowledge_code(e: &KnowledgeError) -> u8 {
    match e {
        KnowledgeError::Io { .. } => exit::IO,
        KnowledgeError::Backend(_) | KnowledgeError::Remote { .. } | KnowledgeError::NoQueries { .. } => exit::BACKEND,
        KnowledgeError::Config(_) | KnowledgeError::EmbedderMismatch { .. } => exit::CONFIG,
        KnowledgeError::Prompt(p) => persona_code(p),
        _ => exit::VALIDATION,
    }
}

fn profile_code(e: &ProfileError) -> u8 {
    match e {
        ProfileError::Io { .. } => exit::IO,
        ProfileError::SampleTooLarge { .. }
        | ProfileError::UnknownStrataKey { .. }
        | ProfileError::ZeroCount
        | ProfileError::NoVignettes
        | ProfileError::Marginals(_) => exit::CONFIG,
        _ => exit::VALIDATION,
    }
}

fn persona_code(e: &PersonaError) -> u8 {
    match e {
        PersonaError::Io { .. } => exit::IO,
        _ => exit::VALIDATION,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_cause() {
        let backend: anyhow::Error = BackendError::CacheMiss { hash: "h".into() }.into();
        assert_eq!(exit_code(&backend.context("running")), exit::BACKEND);
        let wrapped = KnowledgeError::Backend(BackendError::EmptyResponse);
        assert_eq!(exit_code(&anyhow::Error::from(wrapped)), exit::BACKEND);
        let runner = RunnerError::Profile(ProfileError::SampleTooLarge { requested: 5, available: 2 });
        assert_eq!(exit_code(&anyhow::Error::from(runner)), exit::CONFIG);
        let missing: Result<(), VignetteError> = Err(VignetteError::MissingPart { vignette: "x".into(), part: "rise" });
        assert_eq!(exit_code(&missing.context("loading").unwrap_err()), exit::VALIDATION);
        let threshold: anyhow::Error = CliError::ParseThreshold { rate: 0.5, threshold: 0.1 }.into();
        assert_eq!(exit_code(&threshold), exit::PARSE_THRESHOLD);
        assert_eq!(exit_code(&anyhow::anyhow!("something else")), exit::IO);
    }
}

//! Survey-agent engine for macroeconomic-shock vignette experiments.
//!
//! The crate builds household and expert agent populations, renders their
//! persona prompts, equips experts with retrieved background knowledge, runs
//! the baseline/shock questionnaire against a chat backend, and turns the
//! answers into direction tables, effect distributions, mechanism
//! regressions and diversity measures.
//!
//! Modules map onto the workflow stages:
//!
//! - [`profiles`]: population ingestion, synthesis, vignette assignment and
//!   stratified subsampling.
//! - [`persona`]: prompt templates and per-component ablation.
//! - [`knowledge`]: chunking, embedding, cosine retrieval and summaries.
//! - [`backend`]: chat-completion backends (HTTP, record/replay, mock).
//! - [`runner`]: the questionnaire procedure and forecast records.
//! - [`analysis`]: every statistic computed over a set of records.

pub mod analysis;
pub mod assets;
pub mod backend;
pub mod knowledge;
pub mod persona;
pub mod profiles;
pub mod pool;
pub mod rng;
pub mod runner;
pub mod vignette;

pub use vignette::{Scenario, Vignette, VignetteId, VignetteSet};

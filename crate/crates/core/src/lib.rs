//! Core library for the disinfo toolkit: corpus handling, text statistics,
//! nonparametric group comparison, audio feature extraction, detection
//! models, LLM-assisted annotation, and report generation.

pub mod audiofeat;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod llm_annotate;
pub mod report;
pub mod stats;
pub mod textstats;

pub use error::{Error, Result};

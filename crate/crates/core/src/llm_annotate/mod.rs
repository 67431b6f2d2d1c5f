//! Few-shot annotation over an external chat-completion endpoint: prompt
//! construction, strict answer parsing, binary collapse and a resumable
//! rate-limited batch driver.

mod batch;
mod client;
mod prompt;

pub use batch::{
    annotate_batch, annotate_batch_with_template, load_completed_state, write_annotation_csv,
    BatchConfig, BatchReport, PostOutcome, StateRecord,
};
pub use client::{ChatClient, EndpointConfig, API_KEY_ENV};
pub use prompt::{
    build_prompt, collapse_to_binary, parse_label, AnnotationPrompt, FourClassLabel,
    PromptTemplate,
};

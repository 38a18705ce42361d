//! Persona contexts, structured profiles and prompt rendering.

mod context;
mod profile;
mod prompt;

use thiserror::Error;

pub use context::{assemble_context, PersonaArchitecture, PersonaContext};
pub use profile::{
    generate_profile, heading_flags, word_count, ProfileCache, ProfileCacheKey, StructuredProfile,
    MAX_PROFILE_WORDS, PROFILE_ATTEMPTS, PROFILE_HEADINGS,
};
pub use prompt::{
    append_retry_feedback, render_answer_line, render_baseline_prompt, render_history,
    render_prediction_prompt, render_questions, render_template, Prompt, SYSTEM_PROMPT,
};

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("context assembly failed: {0}")]
    Assembly(String),
    #[error("respondent {0} has no prior history to build a profile from")]
    EmptyHistory(String),
    #[error("profile generation for {respondent} failed after {attempts} attempts: {last_error}")]
    ProfileFailed {
        respondent: String,
        attempts: u32,
        last_error: String,
    },
    #[error("cached profile {path} is invalid: {message}")]
    CorruptCache { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

//! Digital persona construction and reliability evaluation for longitudinal
//! panel surveys.
//!
//! The pipeline runs in stages that mirror how a persona experiment is set up:
//!
//! 1. [`panel`]: ingest respondents, the question catalog and long-format
//!    answers, then split them at a temporal cutoff into prior evidence and
//!    held-out targets.
//! 2. [`sampling`]: stratified proportional sampling with largest-remainder
//!    allocation and coverage-based ranking inside each stratum.
//! 3. [`retrieval`] and [`persona`]: build the prompt context for each
//!    respondent (background, structured profile, retrieved prior answers).
//! 4. [`engine`]: split target questions into sub-batches, query a
//!    prediction backend and validate every response before accepting it.
//! 5. [`metrics`] and [`analysis`]: score predictions along six reliability
//!    dimensions and derive the behavioral breakdowns used in reports.

pub mod analysis;
pub mod engine;
pub mod metrics;
pub mod panel;
pub mod persona;
pub mod retrieval;
pub mod sampling;

mod util;

pub use panel::{
    AnswerCode, AnswerRecord, Catalog, Panel, QuestionMeta, Representation, RespondentId,
    StudyKey, StudyType, Task, TaskSplit,
};

//! Sub-batching, prediction backends, response validation and run
//! orchestration.

mod backend;
mod batching;
pub mod mock;
#[cfg(feature = "remote")]
pub mod remote;
mod run;
mod validate;

use thiserror::Error;

pub use backend::{Backend, BackendError, BackendRequest, RequestKind, Unit};
pub use batching::{balanced_sizes, partition_subbatches, SubBatchPlan};
pub use run::{
    predict_subbatch, run_baseline, run_task, PredictionRecord, PredictionSet, RunSummary,
    SkippedUnit, TaskRun, BASELINE_SETTING, PREDICTION_ATTEMPTS,
};
pub use validate::{strip_fences, validate_response, FailureStage, ValidationOutcome};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("run misconfigured: {0}")]
    Config(String),
    #[error(transparent)]
    Retrieval(#[from] crate::retrieval::RetrievalError),
    #[error(transparent)]
    Persona(#[from] crate::persona::PersonaError),
    #[error("cannot read or write {path}: {message}")]
    Output { path: String, message: String },
}

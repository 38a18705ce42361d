use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a backend call is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Prediction,
    Profile,
}

/// Who the call is about: a respondent, or a baseline repeat.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    Respondent(String),
    Repeat(usize),
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Respondent(id) => f.write_str(id),
            Unit::Repeat(i) => write!(f, "{i}"),
        }
    }
}

/// A rendered prompt plus bookkeeping that mock backends may inspect.
///
/// Remote backends only see `system` and `user`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendRequest {
    pub system: String,
    pub user: String,
    pub kind: RequestKind,
    pub unit: Unit,
    /// Variables the response must cover (prediction calls).
    pub variables: Vec<String>,
    /// 1-based attempt number.
    pub attempt: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// A text-generation backend: prompt in, raw text out.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

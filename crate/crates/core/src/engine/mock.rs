//! Deterministic backends for tests and offline runs.
//!
//! Every mock draws its randomness from `derive_seed(seed, [unit, variable,
//! attempt])`, so results do not depend on call order or thread count.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::backend::{Backend, BackendError, BackendRequest, RequestKind, Unit};
use crate::panel::{AnswerCode, Catalog, QuestionMeta, TaskSplit};
use crate::persona::PROFILE_HEADINGS;
use crate::util::derive_seed;

fn answer_json(answer: &AnswerCode) -> Value {
    match answer {
        AnswerCode::Category(c) => json!(c),
        AnswerCode::Numeric(v) => json!(v),
    }
}

fn predictions_json(pairs: impl IntoIterator<Item = (String, AnswerCode)>) -> String {
    let predictions: Vec<Value> = pairs
        .into_iter()
        .map(|(v, a)| json!({"variable_name": v, "predicted_answer": answer_json(&a)}))
        .collect();
    json!({ "predictions": predictions }).to_string()
}

/// Uniform draw over a question's admissible answers. Numeric answers are
/// drawn on the integer grid inside the bounds.
pub fn uniform_answer(meta: &QuestionMeta, rng: &mut impl Rng) -> AnswerCode {
    if meta.representation.is_categorical() {
        let i = rng.gen_range(0..meta.categories.len());
        AnswerCode::Category(meta.categories[i].code)
    } else {
        let (lo, hi) = meta.numeric_bounds.unwrap_or((0.0, 0.0));
        let (lo_i, hi_i) = (lo.ceil() as i64, hi.floor() as i64);
        if lo_i <= hi_i {
            AnswerCode::Numeric(rng.gen_range(lo_i..=hi_i) as f64)
        } else {
            AnswerCode::Numeric(lo)
        }
    }
}

fn rng_for(seed: u64, unit: &Unit, variable: &str, attempt: u32) -> ChaCha8Rng {
    let unit = unit.to_string();
    let attempt = attempt.to_string();
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[&unit, variable, &attempt]))
}

fn prediction_only(request: &BackendRequest, id: &str) -> Result<(), BackendError> {
    match request.kind {
        RequestKind::Prediction => Ok(()),
        RequestKind::Profile => Err(BackendError::Config(format!(
            "{id} only answers prediction requests"
        ))),
    }
}

/// Ground truth per (respondent, variable).
pub type Truth = HashMap<(String, String), AnswerCode>;

/// Target answers of a split as a truth table.
pub fn truth_from_split(split: &TaskSplit) -> Truth {
    split
        .all_targets()
        .map(|r| ((r.respondent_id.0.clone(), r.variable_name.clone()), r.answer))
        .collect()
}

/// Echoes each respondent's true target answer. Baseline repeat `r` echoes
/// the truth of `repeat_respondents[r]`.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    truth: Arc<Truth>,
    repeat_respondents: Vec<String>,
    fallback_seed: u64,
    catalog: Arc<Catalog>,
}

impl OracleBackend {
    pub fn new(truth: Truth, catalog: Arc<Catalog>) -> Self {
        Self {
            truth: Arc::new(truth),
            repeat_respondents: Vec::new(),
            fallback_seed: 0,
            catalog,
        }
    }

    pub fn with_repeat_respondents(mut self, ids: Vec<String>) -> Self {
        self.repeat_respondents = ids;
        self
    }

    fn respondent<'a>(&'a self, unit: &'a Unit) -> Option<&'a str> {
        match unit {
            Unit::Respondent(id) => Some(id),
            Unit::Repeat(r) => self.repeat_respondents.get(*r).map(String::as_str),
        }
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> &str {
        "mock-oracle"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        prediction_only(request, self.id())?;
        let who = self.respondent(&request.unit);
        Ok(predictions_json(request.variables.iter().map(|v| {
            let known = who.and_then(|id| self.truth.get(&(id.to_string(), v.clone())));
            let answer = match (known, self.catalog.get(v)) {
                (Some(a), _) => *a,
                // No truth for this pair (e.g. a baseline repeat whose
                // respondent was not asked): stay admissible.
                (None, Some(meta)) => {
                    uniform_answer(meta, &mut rng_for(self.fallback_seed, &request.unit, v, request.attempt))
                }
                (None, None) => AnswerCode::Category(0),
            };
            (v.clone(), answer)
        })))
    }
}

/// Returns the true answer with probability `accuracy`, otherwise a uniform
/// admissible answer: a stand-in for a persona that knows something about
/// the respondent.
#[derive(Debug, Clone)]
pub struct NoisyOracleBackend {
    truth: Arc<Truth>,
    catalog: Arc<Catalog>,
    accuracy: f64,
    seed: u64,
}

impl NoisyOracleBackend {
    pub fn new(truth: Truth, catalog: Arc<Catalog>, accuracy: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&accuracy), "accuracy must lie in [0, 1]");
        Self {
            truth: Arc::new(truth),
            catalog,
            accuracy,
            seed,
        }
    }
}

impl Backend for NoisyOracleBackend {
    fn id(&self) -> &str {
        "mock-noisy-oracle"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        prediction_only(request, self.id())?;
        let mut out = Vec::with_capacity(request.variables.len());
        for v in &request.variables {
            let meta = self
                .catalog
                .get(v)
                .ok_or_else(|| BackendError::Config(format!("unknown variable {v}")))?;
            let mut rng = rng_for(self.seed, &request.unit, v, request.attempt);
            let truth = match &request.unit {
                Unit::Respondent(id) => self.truth.get(&(id.clone(), v.clone())),
                Unit::Repeat(_) => None,
            };
            let answer = match truth {
                Some(a) if rng.gen_bool(self.accuracy) => *a,
                _ => uniform_answer(meta, &mut rng),
            };
            out.push((v.clone(), answer));
        }
        Ok(predictions_json(out))
    }
}

/// Uniform over each question's admissible answers, ignoring all context.
#[derive(Debug, Clone)]
pub struct UniformBackend {
    catalog: Arc<Catalog>,
    seed: u64,
}

impl UniformBackend {
    pub fn new(catalog: Arc<Catalog>, seed: u64) -> Self {
        Self { catalog, seed }
    }
}

impl Backend for UniformBackend {
    fn id(&self) -> &str {
        "mock-uniform"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        prediction_only(request, self.id())?;
        let mut out = Vec::with_capacity(request.variables.len());
        for v in &request.variables {
            let meta = self
                .catalog
                .get(v)
                .ok_or_else(|| BackendError::Config(format!("unknown variable {v}")))?;
            out.push((v.clone(), uniform_answer(meta, &mut rng_for(self.seed, &request.unit, v, request.attempt))));
        }
        Ok(predictions_json(out))
    }
}

/// Always answers the per-question majority (mode) answer.
#[derive(Debug, Clone)]
pub struct MajorityBackend {
    modes: BTreeMap<String, AnswerCode>,
}

impl MajorityBackend {
    pub fn new(modes: BTreeMap<String, AnswerCode>) -> Self {
        Self { modes }
    }

    /// Mode of each variable's target answers; ties go to the smaller answer.
    pub fn from_split(split: &TaskSplit) -> Self {
        let mut counts: BTreeMap<&str, BTreeMap<AnswerCode, usize>> = BTreeMap::new();
        for r in split.all_targets() {
            *counts.entry(&r.variable_name).or_default().entry(r.answer).or_default() += 1;
        }
        let modes = counts
            .into_iter()
            .map(|(v, c)| {
                let best = c.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(a, _)| *a);
                (v.to_string(), best.expect("non-empty counts"))
            })
            .collect();
        Self { modes }
    }
}

impl Backend for MajorityBackend {
    fn id(&self) -> &str {
        "mock-majority"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        prediction_only(request, self.id())?;
        let out = request
            .variables
            .iter()
            .map(|v| {
                self.modes
                    .get(v)
                    .map(|a| (v.clone(), *a))
                    .ok_or_else(|| BackendError::Config(format!("no majority answer for {v}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(predictions_json(out))
    }
}

/// Replays a fixed script of responses, one per call, then repeats the last
/// entry. Records every request it receives.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: Vec<Result<String, BackendError>>,
    calls: Mutex<Vec<BackendRequest>>,
}

impl ScriptedBackend {
    pub fn new(script: Vec<Result<String, BackendError>>) -> Self {
        assert!(!script.is_empty(), "script needs at least one response");
        Self {
            script,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<BackendRequest> {
        self.calls.lock().expect("call log poisoned").clone()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        "mock-scripted"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let mut calls = self.calls.lock().expect("call log poisoned");
        let i = calls.len().min(self.script.len() - 1);
        calls.push(request.clone());
        self.script[i].clone()
    }
}

/// Writes a short, valid seven-section profile derived from the prompt.
#[derive(Debug, Clone, Default)]
pub struct ProfileMockBackend {
    calls: Arc<Mutex<usize>>,
}

impl ProfileMockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn call_count(&self) -> usize {
        *self.calls.lock().expect("counter poisoned")
    }
}

impl Backend for ProfileMockBackend {
    fn id(&self) -> &str {
        "mock-profile"
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        if request.kind != RequestKind::Profile {
            return Err(BackendError::Config("mock-profile only writes profiles".into()));
        }
        *self.calls.lock().expect("counter poisoned") += 1;
        let answered = request.user.lines().filter(|l| l.starts_with("Q: ")).count();
        Ok(PROFILE_HEADINGS
            .iter()
            .map(|h| format!("{h}\nConsistent tendencies inferred from {answered} prior answers of {}.", request.unit))
            .collect::<Vec<_>>()
            .join("\n\n"))
    }
}

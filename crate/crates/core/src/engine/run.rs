use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendRequest, RequestKind, Unit};
use super::batching::partition_subbatches;
use super::validate::{validate_response, FailureStage};
use super::EngineError;
use crate::panel::{AnswerCode, Catalog, Panel, QuestionMeta, RespondentId, TaskSplit};
use crate::persona::{
    append_retry_feedback, assemble_context, generate_profile, render_baseline_prompt,
    render_prediction_prompt, PersonaArchitecture, ProfileCache, ProfileCacheKey, Prompt,
};
use crate::retrieval::{select_topk_lexical, select_topk_semantic, Candidate, EmbeddingStore, Stopwords};

pub const PREDICTION_ATTEMPTS: u32 = 4;
pub const BASELINE_SETTING: &str = "baseline";

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub unit: Unit,
    pub variable_name: String,
    /// `None` is the missing-prediction marker.
    pub predicted: Option<AnswerCode>,
    pub attempts: u32,
    pub failure_stage: Option<FailureStage>,
}

/// A respondent left out of a run, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedUnit {
    pub respondent_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    /// Architecture name, or `baseline`.
    pub setting: String,
    /// Sorted by unit, then variable.
    pub records: Vec<PredictionRecord>,
    pub skipped: Vec<SkippedUnit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub setting: String,
    pub units: usize,
    pub records: usize,
    pub missing: usize,
    pub skipped: Vec<SkippedUnit>,
    /// Missing records per failure stage.
    pub failure_tally: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    setting: String,
    unit: String,
    variable_name: String,
    predicted: String,
    attempts: u32,
    failure_stage: String,
}

impl PredictionSet {
    fn new(setting: String, mut records: Vec<PredictionRecord>, mut skipped: Vec<SkippedUnit>) -> Self {
        records.sort_by(|a, b| a.unit.cmp(&b.unit).then_with(|| a.variable_name.cmp(&b.variable_name)));
        skipped.sort_by(|a, b| a.respondent_id.cmp(&b.respondent_id));
        Self { setting, records, skipped }
    }

    pub fn is_baseline(&self) -> bool {
        self.setting == BASELINE_SETTING
    }

    pub fn summary(&self) -> RunSummary {
        let mut failure_tally = BTreeMap::new();
        let mut units = std::collections::BTreeSet::new();
        for r in &self.records {
            units.insert(&r.unit);
            if let Some(stage) = r.failure_stage {
                *failure_tally.entry(stage.to_string()).or_insert(0) += 1;
            }
        }
        RunSummary {
            setting: self.setting.clone(),
            units: units.len(),
            records: self.records.len(),
            missing: self.records.iter().filter(|r| r.predicted.is_none()).count(),
            skipped: self.skipped.clone(),
            failure_tally,
        }
    }

    /// Long format: `setting,unit,variable_name,predicted,attempts,failure_stage`.
    /// A missing prediction has an empty `predicted` field.
    pub fn write_csv(&self, path: &Path) -> Result<(), EngineError> {
        let io = |e: csv::Error| EngineError::Output { path: path.display().to_string(), message: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        for r in &self.records {
            w.serialize(CsvRow {
                setting: self.setting.clone(),
                unit: r.unit.to_string(),
                variable_name: r.variable_name.clone(),
                predicted: r.predicted.map(|a| a.to_string()).unwrap_or_default(),
                attempts: r.attempts,
                failure_stage: r.failure_stage.map(|s| s.to_string()).unwrap_or_default(),
            })
            .map_err(io)?;
        }
        w.flush().map_err(|e| EngineError::Output { path: path.display().to_string(), message: e.to_string() })
    }

    /// Reads a prediction file; answers are re-parsed against the catalog.
    pub fn read_csv(path: &Path, catalog: &Catalog) -> Result<Self, EngineError> {
        let err = |line: usize, m: String| EngineError::Output {
            path: path.display().to_string(),
            message: format!("line {line}: {m}"),
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| err(0, e.to_string()))?;
        let mut setting: Option<String> = None;
        let mut records = Vec::new();
        for (i, row) in r.deserialize::<CsvRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| err(line, e.to_string()))?;
            match &setting {
                None => setting = Some(row.setting.clone()),
                Some(s) if *s != row.setting => return Err(err(line, format!("mixed settings `{s}` and `{}`", row.setting))),
                _ => {}
            }
            let unit = if row.setting == BASELINE_SETTING {
                Unit::Repeat(row.unit.parse().map_err(|_| err(line, format!("bad repeat index `{}`", row.unit)))?)
            } else {
                Unit::Respondent(row.unit)
            };
            let meta = catalog
                .get(&row.variable_name)
                .ok_or_else(|| err(line, format!("unknown variable `{}`", row.variable_name)))?;
            let predicted = if row.predicted.is_empty() {
                None
            } else {
                Some(meta.parse_answer(&row.predicted).map_err(|m| err(line, m))?)
            };
            let failure_stage = if row.failure_stage.is_empty() {
                None
            } else {
                Some(row.failure_stage.parse().map_err(|m| err(line, m))?)
            };
            records.push(PredictionRecord {
                unit,
                variable_name: row.variable_name,
                predicted,
                attempts: row.attempts,
                failure_stage,
            });
        }
        Ok(Self::new(setting.unwrap_or_default(), records, Vec::new()))
    }
}

/// Sends one sub-batch, validating each response and re-asking with the
/// rejected response and error appended, for at most `retry_cap` attempts.
pub fn predict_subbatch(
    prompt: &Prompt,
    unit: &Unit,
    batch: &[&QuestionMeta],
    catalog: &Catalog,
    backend: &dyn Backend,
    retry_cap: u32,
) -> Vec<PredictionRecord> {
    assert!(retry_cap >= 1, "retry cap must allow at least one attempt");
    let variables: Vec<String> = batch.iter().map(|q| q.variable_name.clone()).collect();
    let mut user = prompt.user.clone();
    let mut last_stage = FailureStage::Transport;
    for attempt in 1..=retry_cap {
        let request = BackendRequest {
            system: prompt.system.clone(),
            user: user.clone(),
            kind: RequestKind::Prediction,
            unit: unit.clone(),
            variables: variables.clone(),
            attempt,
        };
        let (raw, stage, message) = match backend.complete(&request) {
            Ok(raw) => {
                let outcome = validate_response(&raw, &variables, catalog);
                match (outcome.predictions, outcome.failure) {
                    (Some(predictions), None) => {
                        return variables
                            .iter()
                            .map(|v| PredictionRecord {
                                unit: unit.clone(),
                                variable_name: v.clone(),
                                predicted: Some(predictions[v]),
                                attempts: attempt,
                                failure_stage: None,
                            })
                            .collect();
                    }
                    (_, Some((stage, message))) => (raw, stage, message),
                    (None, None) => unreachable!("validation yields predictions or a failure"),
                }
            }
            Err(e) => (String::new(), FailureStage::Transport, e.to_string()),
        };
        log::debug!("{unit}: attempt {attempt} failed at {stage}: {message}");
        user = append_retry_feedback(&prompt.user, &raw, &message);
        last_stage = stage;
    }
    variables
        .into_iter()
        .map(|v| PredictionRecord {
            unit: unit.clone(),
            variable_name: v,
            predicted: None,
            attempts: retry_cap,
            failure_stage: Some(last_stage),
        })
        .collect()
}

/// Everything a persona run needs.
pub struct TaskRun<'a> {
    pub panel: &'a Panel,
    pub split: &'a TaskSplit,
    pub respondents: &'a [RespondentId],
    pub architecture: PersonaArchitecture,
    pub backend: &'a dyn Backend,
    /// Backend and cache for structured profiles (profile architectures).
    pub profiles: Option<(&'a dyn Backend, &'a ProfileCache)>,
    /// Dataset source recorded in profile cache keys.
    pub source: &'a str,
    /// Required by the semantic retrieval architecture.
    pub embeddings: Option<&'a EmbeddingStore>,
    pub stopwords: &'a Stopwords,
    pub batch_size: usize,
    pub retry_cap: u32,
    pub jobs: usize,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, EngineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EngineError::Config(format!("cannot start worker pool: {e}")))
}

enum UnitOutcome {
    Done(Vec<PredictionRecord>),
    Skipped(SkippedUnit),
}

impl TaskRun<'_> {
    fn check(&self) -> Result<(), EngineError> {
        if self.batch_size == 0 {
            return Err(EngineError::Config("batch size must be at least 1".into()));
        }
        if self.architecture.needs_profile() && self.profiles.is_none() {
            return Err(EngineError::Config(format!("{} needs a profile backend", self.architecture)));
        }
        if self.architecture == PersonaArchitecture::ProfileSemanticTopK && self.embeddings.is_none() {
            return Err(EngineError::Config("semantic retrieval needs an embedding store".into()));
        }
        Ok(())
    }

    fn run_one(&self, id: &RespondentId) -> Result<UnitOutcome, EngineError> {
        let catalog = self.panel.catalog();
        let respondent = self
            .panel
            .respondent(id)
            .ok_or_else(|| EngineError::Config(format!("sampled respondent {id} is not in the panel")))?;
        let skip = |reason: String| {
            Ok(UnitOutcome::Skipped(SkippedUnit {
                respondent_id: id.0.clone(),
                reason,
            }))
        };
        let prior = self.split.prior(id);

        let profile = match self.profiles {
            Some((backend, cache)) if self.architecture.needs_profile() => {
                if prior.is_empty() {
                    return skip("no prior history for a profile".into());
                }
                let key = ProfileCacheKey {
                    respondent_id: id.0.clone(),
                    source: self.source.to_string(),
                    cutoff_year: self.split.cutoff_year,
                    input_scope: self.split.task.input_scope(),
                    model: backend.id().to_string(),
                };
                match generate_profile(prior, catalog, backend, &key, cache) {
                    Ok(p) => Some(p.text),
                    Err(e) => return skip(e.to_string()),
                }
            }
            _ => None,
        };

        let mut targets: Vec<&QuestionMeta> = self
            .split
            .targets(id)
            .iter()
            .filter_map(|r| catalog.get(&r.variable_name))
            .collect();
        targets.sort_by_key(|q| catalog.position(&q.variable_name));

        let candidates: Vec<Candidate<'_>> = prior
            .iter()
            .filter_map(|record| catalog.get(&record.variable_name).map(|meta| Candidate { record, meta }))
            .collect();

        let unit = Unit::Respondent(id.0.clone());
        let mut records = Vec::with_capacity(targets.len());
        for plan in partition_subbatches(&targets, self.batch_size) {
            for batch in &plan.batches {
                let retrieval = match self.architecture {
                    PersonaArchitecture::ProfileLexicalTopK => {
                        Some(select_topk_lexical(&candidates, batch, plan.realized_size, self.stopwords))
                    }
                    PersonaArchitecture::ProfileSemanticTopK => {
                        let store = self.embeddings.expect("checked before the run");
                        Some(select_topk_semantic(&candidates, batch, store, plan.realized_size)?)
                    }
                    _ => None,
                };
                let context = assemble_context(
                    self.architecture,
                    respondent,
                    profile.as_deref(),
                    retrieval.as_ref().map(|r| (r, candidates.as_slice())),
                    catalog,
                )?;
                let prompt = render_prediction_prompt(&context, batch);
                records.extend(predict_subbatch(&prompt, &unit, batch, catalog, self.backend, self.retry_cap));
            }
        }
        Ok(UnitOutcome::Done(records))
    }
}

/// Predicts every target of every listed respondent. Respondents run in
/// parallel on `jobs` threads; the result is sorted, so it does not depend
/// on scheduling.
pub fn run_task(run: &TaskRun<'_>) -> Result<PredictionSet, EngineError> {
    run.check()?;
    let outcomes: Vec<Result<UnitOutcome, EngineError>> =
        pool(run.jobs)?.install(|| run.respondents.par_iter().map(|id| run.run_one(id)).collect());
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            UnitOutcome::Done(r) => records.extend(r),
            UnitOutcome::Skipped(s) => {
                log::warn!("skipping respondent {}: {}", s.respondent_id, s.reason);
                skipped.push(s);
            }
        }
    }
    Ok(PredictionSet::new(run.architecture.to_string(), records, skipped))
}

/// Asks each question `n_repeats` times with the no-context prompt, through
/// the same batching and validation as persona runs.
pub fn run_baseline(
    questions: &[&QuestionMeta],
    n_repeats: usize,
    backend: &dyn Backend,
    catalog: &Catalog,
    batch_size: usize,
    retry_cap: u32,
    jobs: usize,
) -> Result<PredictionSet, EngineError> {
    if n_repeats == 0 {
        return Err(EngineError::Config("baseline needs at least one repeat".into()));
    }
    if batch_size == 0 {
        return Err(EngineError::Config("batch size must be at least 1".into()));
    }
    let mut ordered = questions.to_vec();
    ordered.sort_by_key(|q| catalog.position(&q.variable_name));
    let batches: Vec<(Vec<&QuestionMeta>, Prompt)> = partition_subbatches(&ordered, batch_size)
        .into_iter()
        .flat_map(|plan| plan.batches)
        .map(|b| {
            let prompt = render_baseline_prompt(&b);
            (b, prompt)
        })
        .collect();
    let records: Vec<PredictionRecord> = pool(jobs)?.install(|| {
        (0..n_repeats)
            .into_par_iter()
            .flat_map_iter(|r| {
                let unit = Unit::Repeat(r);
                batches
                    .iter()
                    .flat_map(|(batch, prompt)| predict_subbatch(prompt, &unit, batch, catalog, backend, retry_cap))
                    .collect::<Vec<_>>()
            })
            .collect()
    });
    Ok(PredictionSet::new(BASELINE_SETTING.to_string(), records, Vec::new()))
}

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnswerRecord, Panel, RespondentId, StudyType};

/// Which direction a prediction task generalizes in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Single-wave history predicts core-study answers of the cutoff year.
    CorePrediction,
    /// Latest core-study answers predict single-wave answers at/after the cutoff.
    SingleWavePrediction,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::CorePrediction => "core_prediction",
            Task::SingleWavePrediction => "single_wave_prediction",
        }
    }

    /// Study type supplying prior evidence.
    pub fn input_scope(self) -> StudyType {
        match self {
            Task::CorePrediction => StudyType::SingleWave,
            Task::SingleWavePrediction => StudyType::Core,
        }
    }

    /// Study type supplying targets.
    pub fn target_scope(self) -> StudyType {
        match self {
            Task::CorePrediction => StudyType::Core,
            Task::SingleWavePrediction => StudyType::SingleWave,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core_prediction" | "core" => Ok(Task::CorePrediction),
            "single_wave_prediction" | "single_wave" => Ok(Task::SingleWavePrediction),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Prior evidence and held-out targets per respondent.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub task: Task,
    pub cutoff_year: i32,
    prior: BTreeMap<RespondentId, Vec<AnswerRecord>>,
    targets: BTreeMap<RespondentId, Vec<AnswerRecord>>,
}

impl TaskSplit {
    pub fn prior(&self, id: &RespondentId) -> &[AnswerRecord] {
        self.prior.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn targets(&self, id: &RespondentId) -> &[AnswerRecord] {
        self.targets.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn respondents_with_targets(&self) -> impl Iterator<Item = &RespondentId> {
        self.targets.keys()
    }

    pub fn all_prior(&self) -> impl Iterator<Item = &AnswerRecord> {
        self.prior.values().flatten()
    }

    pub fn all_targets(&self) -> impl Iterator<Item = &AnswerRecord> {
        self.targets.values().flatten()
    }
}

/// Partitions panel answers into prior evidence and targets.
///
/// Target records are unique per (respondent, variable); when a variable was
/// answered more than once in the target window the latest record is kept
/// (ties on year resolved by file order), mirroring the prior-side rule for
/// single-wave prediction.
pub fn split_by_cutoff(panel: &Panel, task: Task, cutoff_year: i32) -> TaskSplit {
    let catalog = panel.catalog();
    let scope_of = |rec: &AnswerRecord| catalog.get(&rec.variable_name).map(|q| q.study_key.kind);

    let mut prior: BTreeMap<RespondentId, Vec<AnswerRecord>> = BTreeMap::new();
    let input_scope = task.input_scope();
    match task {
        Task::CorePrediction => {
            for rec in panel.answers() {
                if rec.year < cutoff_year && scope_of(rec) == Some(input_scope) {
                    prior.entry(rec.respondent_id.clone()).or_default().push(rec.clone());
                }
            }
        }
        Task::SingleWavePrediction => {
            for (id, recs) in latest_per_variable(panel, |rec| {
                rec.year < cutoff_year && scope_of(rec) == Some(input_scope)
            }) {
                prior.insert(id, recs);
            }
        }
    }

    let target_scope = task.target_scope();
    let in_window = |year: i32| match task {
        Task::CorePrediction => year == cutoff_year,
        Task::SingleWavePrediction => year == cutoff_year || year == cutoff_year + 1,
    };
    let targets = latest_per_variable(panel, |rec| {
        in_window(rec.year) && scope_of(rec) == Some(target_scope)
    });

    TaskSplit {
        task,
        cutoff_year,
        prior,
        targets,
    }
}

/// Keeps, per (respondent, variable), the record with the largest year; ties
/// go to the later record in file order. Output keeps file order of the kept
/// records.
fn latest_per_variable(
    panel: &Panel,
    keep: impl Fn(&AnswerRecord) -> bool,
) -> BTreeMap<RespondentId, Vec<AnswerRecord>> {
    let mut best: HashMap<(&RespondentId, &str), usize> = HashMap::new();
    let answers = panel.answers();
    for (i, rec) in answers.iter().enumerate() {
        if !keep(rec) {
            continue;
        }
        let key = (&rec.respondent_id, rec.variable_name.as_str());
        match best.get(&key) {
            Some(&j) if answers[j].year > rec.year => {}
            _ => {
                best.insert(key, i);
            }
        }
    }
    let mut kept: Vec<usize> = best.into_values().collect();
    kept.sort_unstable();
    let mut out: BTreeMap<RespondentId, Vec<AnswerRecord>> = BTreeMap::new();
    for i in kept {
        let rec = &answers[i];
        out.entry(rec.respondent_id.clone()).or_default().push(rec.clone());
    }
    out
}

/// Respondents with a non-empty background, non-empty prior history and at
/// least one target answer.
pub fn eligible_respondents(split: &TaskSplit, panel: &Panel) -> BTreeSet<RespondentId> {
    panel
        .respondents()
        .iter()
        .filter(|r| {
            r.background.is_non_empty()
                && !split.prior(&r.id).is_empty()
                && !split.targets(&r.id).is_empty()
        })
        .map(|r| r.id.clone())
        .collect()
}

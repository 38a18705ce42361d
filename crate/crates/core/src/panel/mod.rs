//! Panel data model, ingestion, the temporal prior/target split and a
//! synthetic panel generator.

mod background;
mod io;
mod split;
pub mod synth;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use background::{Background, BackgroundValue, BACKGROUND_VARIABLES};
pub use io::{load_panel, save_panel, PanelPaths};
pub use split::{eligible_respondents, split_by_cutoff, Task, TaskSplit};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("{file}:{line}: field `{field}`: {message}")]
    Ingest {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("inadmissible answer {code} for variable `{variable}`")]
    Inadmissible { variable: String, code: String },
    #[error("answer references unknown respondent `{0}`")]
    UnknownRespondent(String),
    #[error("answer references unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate respondent id `{0}`")]
    DuplicateRespondent(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("invalid question metadata for `{variable}`: {message}")]
    InvalidQuestion { variable: String, message: String },
    #[error("synthetic config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Opaque respondent identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RespondentId(pub String);

impl RespondentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RespondentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Respondent {
    pub id: RespondentId,
    pub background: Background,
}

/// How a question's answers are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Ordinal,
    Nominal,
    Binary,
    TrueFalse,
    NumericRange,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Ordinal => "ordinal",
            Representation::Nominal => "nominal",
            Representation::Binary => "binary",
            Representation::TrueFalse => "true_false",
            Representation::NumericRange => "numeric_range",
        }
    }

    pub fn is_categorical(self) -> bool {
        !matches!(self, Representation::NumericRange)
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ordinal" => Ok(Representation::Ordinal),
            "nominal" => Ok(Representation::Nominal),
            "binary" => Ok(Representation::Binary),
            "true_false" => Ok(Representation::TrueFalse),
            "numeric_range" => Ok(Representation::NumericRange),
            other => Err(format!("unknown representation type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyType {
    /// Repeated longitudinal module.
    Core,
    /// One-off topical survey.
    SingleWave,
}

impl StudyType {
    fn prefix(self) -> &'static str {
        match self {
            StudyType::Core => "core",
            StudyType::SingleWave => "wave",
        }
    }
}

/// Study identifier, serialized as `core:<project>` or `wave:<study>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StudyKey {
    pub kind: StudyType,
    pub id: String,
}

impl StudyKey {
    pub fn core(id: impl Into<String>) -> Self {
        Self {
            kind: StudyType::Core,
            id: id.into(),
        }
    }

    pub fn single_wave(id: impl Into<String>) -> Self {
        Self {
            kind: StudyType::SingleWave,
            id: id.into(),
        }
    }
}

impl fmt::Display for StudyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.prefix(), self.id)
    }
}

impl FromStr for StudyKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, id) = s
            .split_once(':')
            .ok_or_else(|| format!("study key `{s}` must look like core:<id> or wave:<id>"))?;
        if id.is_empty() {
            return Err(format!("study key `{s}` has an empty id"));
        }
        let kind = match prefix {
            "core" => StudyType::Core,
            "wave" => StudyType::SingleWave,
            other => return Err(format!("unknown study kind `{other}`")),
        };
        Ok(Self {
            kind,
            id: id.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub code: i64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionMeta {
    pub variable_name: String,
    pub label: String,
    pub representation: Representation,
    /// Free classification tag (e.g. "attitude", "behavior").
    pub question_type: String,
    pub categories: Vec<Category>,
    pub numeric_bounds: Option<(f64, f64)>,
    pub study_key: StudyKey,
    pub domain: String,
}

impl QuestionMeta {
    pub fn validate(&self) -> Result<(), PanelError> {
        let invalid = |message: &str| PanelError::InvalidQuestion {
            variable: self.variable_name.clone(),
            message: message.to_string(),
        };
        if self.variable_name.is_empty() {
            return Err(invalid("empty variable name"));
        }
        if self.representation.is_categorical() {
            if self.categories.is_empty() {
                return Err(invalid("categorical question without categories"));
            }
            let mut seen = HashSet::new();
            for c in &self.categories {
                if !seen.insert(c.code) {
                    return Err(invalid(&format!("duplicate category code {}", c.code)));
                }
            }
        } else {
            match self.numeric_bounds {
                Some((lo, hi)) if lo <= hi && lo.is_finite() && hi.is_finite() => {}
                Some(_) => return Err(invalid("numeric bounds must satisfy min <= max")),
                None => return Err(invalid("numeric_range question without bounds")),
            }
        }
        Ok(())
    }

    pub fn is_admissible(&self, answer: &AnswerCode) -> bool {
        match (self.representation.is_categorical(), answer) {
            (true, AnswerCode::Category(code)) => self.categories.iter().any(|c| c.code == *code),
            (false, AnswerCode::Numeric(v)) => match self.numeric_bounds {
                Some((lo, hi)) => v.is_finite() && *v >= lo && *v <= hi,
                None => false,
            },
            _ => false,
        }
    }

    pub fn category_label(&self, code: i64) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.code == code)
            .map(|c| c.label.as_str())
    }

    /// Parses an answer cell according to the question's representation.
    pub fn parse_answer(&self, raw: &str) -> Result<AnswerCode, String> {
        let raw = raw.trim();
        if self.representation.is_categorical() {
            raw.parse::<i64>()
                .map(AnswerCode::Category)
                .map_err(|_| format!("`{raw}` is not an integer category code"))
        } else {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(AnswerCode::Numeric)
                .ok_or_else(|| format!("`{raw}` is not a finite number"))
        }
    }

    /// Human-readable rendering of an answer, used in prompts.
    pub fn answer_label(&self, answer: &AnswerCode) -> String {
        match answer {
            AnswerCode::Category(code) => self
                .category_label(*code)
                .map(str::to_string)
                .unwrap_or_else(|| code.to_string()),
            AnswerCode::Numeric(v) => v.to_string(),
        }
    }

    /// Categories rendered as `code=label` pairs joined by `|`.
    pub fn categories_field(&self) -> String {
        self.categories
            .iter()
            .map(|c| format!("{}={}", c.code, c.label))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// A single answer: a category code or a numeric value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerCode {
    Category(i64),
    Numeric(f64),
}

impl PartialEq for AnswerCode {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (AnswerCode::Category(a), AnswerCode::Category(b)) => a == b,
            (AnswerCode::Numeric(a), AnswerCode::Numeric(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for AnswerCode {}

impl Hash for AnswerCode {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            AnswerCode::Category(c) => {
                0u8.hash(state);
                c.hash(state);
            }
            AnswerCode::Numeric(v) => {
                1u8.hash(state);
                v.to_bits().hash(state);
            }
        }
    }
}

impl PartialOrd for AnswerCode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AnswerCode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (AnswerCode::Category(a), AnswerCode::Category(b)) => a.cmp(b),
            (AnswerCode::Numeric(a), AnswerCode::Numeric(b)) => a.total_cmp(b),
            (AnswerCode::Category(_), AnswerCode::Numeric(_)) => Ordering::Less,
            (AnswerCode::Numeric(_), AnswerCode::Category(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for AnswerCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerCode::Category(c) => write!(f, "{c}"),
            AnswerCode::Numeric(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerRecord {
    pub respondent_id: RespondentId,
    pub variable_name: String,
    pub year: i32,
    pub answer: AnswerCode,
}

/// Question metadata indexed by variable name, in catalog order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    questions: Vec<QuestionMeta>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(questions: Vec<QuestionMeta>) -> Result<Self, PanelError> {
        let mut index = HashMap::with_capacity(questions.len());
        for (i, q) in questions.iter().enumerate() {
            q.validate()?;
            if index.insert(q.variable_name.clone(), i).is_some() {
                return Err(PanelError::DuplicateVariable(q.variable_name.clone()));
            }
        }
        Ok(Self { questions, index })
    }

    pub fn get(&self, variable: &str) -> Option<&QuestionMeta> {
        self.index.get(variable).map(|&i| &self.questions[i])
    }

    /// Position of a variable in catalog order.
    pub fn position(&self, variable: &str) -> Option<usize> {
        self.index.get(variable).copied()
    }

    pub fn questions(&self) -> &[QuestionMeta] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

/// Respondents, question catalog and answer records, validated together.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    respondents: Vec<Respondent>,
    respondent_index: HashMap<RespondentId, usize>,
    catalog: Catalog,
    answers: Vec<AnswerRecord>,
}

impl Panel {
    pub fn new(
        respondents: Vec<Respondent>,
        catalog: Catalog,
        answers: Vec<AnswerRecord>,
    ) -> Result<Self, PanelError> {
        let mut respondent_index = HashMap::with_capacity(respondents.len());
        for (i, r) in respondents.iter().enumerate() {
            if respondent_index.insert(r.id.clone(), i).is_some() {
                return Err(PanelError::DuplicateRespondent(r.id.0.clone()));
            }
        }
        for a in &answers {
            if !respondent_index.contains_key(&a.respondent_id) {
                return Err(PanelError::UnknownRespondent(a.respondent_id.0.clone()));
            }
            let meta = catalog
                .get(&a.variable_name)
                .ok_or_else(|| PanelError::UnknownVariable(a.variable_name.clone()))?;
            if !meta.is_admissible(&a.answer) {
                return Err(PanelError::Inadmissible {
                    variable: a.variable_name.clone(),
                    code: a.answer.to_string(),
                });
            }
        }
        Ok(Self {
            respondents,
            respondent_index,
            catalog,
            answers,
        })
    }

    pub fn respondents(&self) -> &[Respondent] {
        &self.respondents
    }

    pub fn respondent(&self, id: &RespondentId) -> Option<&Respondent> {
        self.respondent_index.get(id).map(|&i| &self.respondents[i])
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Answer records in file order.
    pub fn answers(&self) -> &[AnswerRecord] {
        &self.answers
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.answers.iter().map(|a| a.year).min()?;
        let max = self.answers.iter().map(|a| a.year).max()?;
        Some((min, max))
    }
}

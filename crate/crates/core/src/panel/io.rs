//! Delimited-file ingestion and persistence for panels.
//!
//! Layouts:
//! - background: `respondent_id` followed by the 34 background columns;
//! - questions: `variable_name,label,representation_type,question_type,categories,min,max,study_key,domain`
//!   with categories as `code=label` pairs joined by `|`;
//! - answers: `respondent_id,variable_name,year,answer` (long format).

use std::fs::File;
use std::path::{Path, PathBuf};

use super::background::{Background, BackgroundValue, BACKGROUND_VARIABLES};
use super::{
    AnswerRecord, Catalog, Category, Panel, PanelError, QuestionMeta, Respondent, RespondentId,
};

pub const QUESTION_COLUMNS: [&str; 9] = [
    "variable_name",
    "label",
    "representation_type",
    "question_type",
    "categories",
    "min",
    "max",
    "study_key",
    "domain",
];

pub const ANSWER_COLUMNS: [&str; 4] = ["respondent_id", "variable_name", "year", "answer"];

/// The three files making up a panel on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelPaths {
    pub background: PathBuf,
    pub questions: PathBuf,
    pub answers: PathBuf,
}

impl PanelPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            background: dir.join("background.csv"),
            questions: dir.join("questions.csv"),
            answers: dir.join("answers.csv"),
        }
    }
}

fn ingest_err(path: &Path, line: usize, field: &str, message: impl Into<String>) -> PanelError {
    PanelError::Ingest {
        file: path.display().to_string(),
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, PanelError> {
    let file = File::open(path).map_err(|source| PanelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(
    reader: &mut csv::Reader<File>,
    path: &Path,
    expected: &[&str],
) -> Result<(), PanelError> {
    let header = reader.headers().map_err(|source| PanelError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(ingest_err(
            path,
            1,
            "header",
            format!("expected columns [{}], found [{}]", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn records(
    reader: &mut csv::Reader<File>,
    path: &Path,
) -> Result<Vec<(usize, csv::StringRecord)>, PanelError> {
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ingest_err(path, line, "row", e.to_string()))?;
        out.push((line, rec));
    }
    Ok(out)
}

pub fn load_panel(paths: &PanelPaths) -> Result<Panel, PanelError> {
    let respondents = load_background(&paths.background)?;
    let catalog = load_questions(&paths.questions)?;
    let answers = load_answers(&paths.answers, &catalog)?;
    Panel::new(respondents, catalog, answers)
}

fn load_background(path: &Path) -> Result<Vec<Respondent>, PanelError> {
    let mut reader = open_reader(path)?;
    let mut expected = vec!["respondent_id"];
    expected.extend(BACKGROUND_VARIABLES.iter().map(|v| v.name));
    check_header(&mut reader, path, &expected)?;
    let mut out = Vec::new();
    for (line, rec) in records(&mut reader, path)? {
        let id = rec.get(0).unwrap_or_default();
        if id.is_empty() {
            return Err(ingest_err(path, line, "respondent_id", "empty identifier"));
        }
        let mut values = [BackgroundValue::Unknown; 34];
        for (i, var) in BACKGROUND_VARIABLES.iter().enumerate() {
            let raw = rec.get(i + 1).unwrap_or_default();
            values[i] = BackgroundValue::parse(raw).map_err(|m| ingest_err(path, line, var.name, m))?;
        }
        out.push(Respondent {
            id: RespondentId::new(id),
            background: Background::from_values(values),
        });
    }
    Ok(out)
}

fn parse_categories(raw: &str) -> Result<Vec<Category>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split('|')
        .map(|pair| {
            let (code, label) = pair
                .split_once('=')
                .ok_or_else(|| format!("category `{pair}` is not a code=label pair"))?;
            let code = code
                .trim()
                .parse::<i64>()
                .map_err(|_| format!("category code `{code}` is not an integer"))?;
            Ok(Category {
                code,
                label: label.to_string(),
            })
        })
        .collect()
}

fn parse_bound(raw: &str) -> Result<Option<f64>, String> {
    if raw.trim().is_empty() {
        return Ok(None);
    }
    raw.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| format!("`{raw}` is not a number"))
}

fn load_questions(path: &Path) -> Result<Catalog, PanelError> {
    let mut reader = open_reader(path)?;
    check_header(&mut reader, path, &QUESTION_COLUMNS)?;
    let mut questions = Vec::new();
    for (line, rec) in records(&mut reader, path)? {
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let representation = field(2)
            .parse()
            .map_err(|m: String| ingest_err(path, line, "representation_type", m))?;
        let categories =
            parse_categories(field(4)).map_err(|m| ingest_err(path, line, "categories", m))?;
        let min = parse_bound(field(5)).map_err(|m| ingest_err(path, line, "min", m))?;
        let max = parse_bound(field(6)).map_err(|m| ingest_err(path, line, "max", m))?;
        let numeric_bounds = match (min, max) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return Err(ingest_err(path, line, "min", "min and max must be given together")),
        };
        let study_key = field(7)
            .parse()
            .map_err(|m: String| ingest_err(path, line, "study_key", m))?;
        let meta = QuestionMeta {
            variable_name: field(0).to_string(),
            label: field(1).to_string(),
            representation,
            question_type: field(3).to_string(),
            categories,
            numeric_bounds,
            study_key,
            domain: field(8).to_string(),
        };
        meta.validate().map_err(|e| ingest_err(path, line, "variable_name", e.to_string()))?;
        questions.push(meta);
    }
    Catalog::new(questions)
}

fn load_answers(path: &Path, catalog: &Catalog) -> Result<Vec<AnswerRecord>, PanelError> {
    let mut reader = open_reader(path)?;
    check_header(&mut reader, path, &ANSWER_COLUMNS)?;
    let mut out = Vec::new();
    for (line, rec) in records(&mut reader, path)? {
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let variable = field(1);
        let meta = catalog
            .get(variable)
            .ok_or_else(|| PanelError::UnknownVariable(variable.to_string()))?;
        let year = field(2)
            .trim()
            .parse::<i32>()
            .map_err(|_| ingest_err(path, line, "year", format!("`{}` is not a year", field(2))))?;
        let answer = meta
            .parse_answer(field(3))
            .map_err(|m| ingest_err(path, line, "answer", m))?;
        if !meta.is_admissible(&answer) {
            return Err(PanelError::Inadmissible {
                variable: variable.to_string(),
                code: answer.to_string(),
            });
        }
        out.push(AnswerRecord {
            respondent_id: RespondentId::new(field(0)),
            variable_name: variable.to_string(),
            year,
            answer,
        });
    }
    Ok(out)
}

fn writer(path: &Path) -> Result<csv::Writer<File>, PanelError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| PanelError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(|source| PanelError::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_panel(panel: &Panel, paths: &PanelPaths) -> Result<(), PanelError> {
    let csv_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: csv::Error| PanelError::Csv {
            path: path.clone(),
            source,
        }
    };

    let mut w = writer(&paths.background)?;
    let mut header = vec!["respondent_id".to_string()];
    header.extend(BACKGROUND_VARIABLES.iter().map(|v| v.name.to_string()));
    w.write_record(&header).map_err(csv_err(&paths.background))?;
    for r in panel.respondents() {
        let mut row = vec![r.id.0.clone()];
        row.extend(r.background.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err(&paths.background))?;
    }
    w.flush().map_err(|source| PanelError::Io {
        path: paths.background.display().to_string(),
        source,
    })?;

    let mut w = writer(&paths.questions)?;
    w.write_record(QUESTION_COLUMNS).map_err(csv_err(&paths.questions))?;
    for q in panel.catalog().questions() {
        let (min, max) = q
            .numeric_bounds
            .map(|(lo, hi)| (lo.to_string(), hi.to_string()))
            .unwrap_or_default();
        w.write_record([
            q.variable_name.as_str(),
            q.label.as_str(),
            q.representation.as_str(),
            q.question_type.as_str(),
            q.categories_field().as_str(),
            min.as_str(),
            max.as_str(),
            q.study_key.to_string().as_str(),
            q.domain.as_str(),
        ])
        .map_err(csv_err(&paths.questions))?;
    }
    w.flush().map_err(|source| PanelError::Io {
        path: paths.questions.display().to_string(),
        source,
    })?;

    let mut w = writer(&paths.answers)?;
    w.write_record(ANSWER_COLUMNS).map_err(csv_err(&paths.answers))?;
    for a in panel.answers() {
        w.write_record([
            a.respondent_id.0.as_str(),
            a.variable_name.as_str(),
            a.year.to_string().as_str(),
            a.answer.to_string().as_str(),
        ])
        .map_err(csv_err(&paths.answers))?;
    }
    w.flush().map_err(|source| PanelError::Io {
        path: paths.answers.display().to_string(),
        source,
    })?;
    Ok(())
}

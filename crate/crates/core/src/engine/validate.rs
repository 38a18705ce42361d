use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::panel::{AnswerCode, Catalog, QuestionMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Parse,
    Schema,
    Coverage,
    TypeRange,
    Transport,
}

impl FailureStage {
    pub const VALIDATION: [FailureStage; 4] = [
        FailureStage::Parse,
        FailureStage::Schema,
        FailureStage::Coverage,
        FailureStage::TypeRange,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureStage::Parse => "parse",
            FailureStage::Schema => "schema",
            FailureStage::Coverage => "coverage",
            FailureStage::TypeRange => "type_range",
            FailureStage::Transport => "transport",
        }
    }
}

impl fmt::Display for FailureStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FailureStage::VALIDATION
            .into_iter()
            .chain([FailureStage::Transport])
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown failure stage `{s}`"))
    }
}

/// Result of running a response through the four validation stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    /// Stages passed, in order.
    pub passed: Vec<FailureStage>,
    /// First failing stage and its message.
    pub failure: Option<(FailureStage, String)>,
    /// Normalized answers, present iff every stage passed.
    pub predictions: Option<BTreeMap<String, AnswerCode>>,
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    fn fail(passed: Vec<FailureStage>, stage: FailureStage, message: String) -> Self {
        Self {
            passed,
            failure: Some((stage, message)),
            predictions: None,
        }
    }
}

/// Removes an optional surrounding markdown code fence.
pub fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return t;
    };
    // drop the info string (e.g. `json`) on the opening line
    match body.find('\n') {
        Some(nl) => body[nl + 1..].trim(),
        None => body.trim(),
    }
}

fn normalize(meta: &QuestionMeta, value: &Value) -> Result<AnswerCode, String> {
    let v = &meta.variable_name;
    let number = match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }
    .filter(|x| x.is_finite())
    .ok_or_else(|| format!("{v}: predicted_answer {value} is not a number"))?;
    if meta.representation.is_categorical() {
        if number.fract() != 0.0 {
            return Err(format!("{v}: {number} is not an integer category code"));
        }
        let code = AnswerCode::Category(number as i64);
        if !meta.is_admissible(&code) {
            let codes: Vec<String> = meta.categories.iter().map(|c| c.code.to_string()).collect();
            return Err(format!("{v}: code {code} is not one of [{}]", codes.join(", ")));
        }
        Ok(code)
    } else {
        let answer = AnswerCode::Numeric(number);
        if !meta.is_admissible(&answer) {
            let (lo, hi) = meta.numeric_bounds.unwrap_or((f64::NAN, f64::NAN));
            return Err(format!("{v}: {number} is outside [{lo}, {hi}]"));
        }
        Ok(answer)
    }
}

/// Parse → schema → coverage → type/range. The first failure stops
/// validation.
pub fn validate_response(raw: &str, expected: &[String], catalog: &Catalog) -> ValidationOutcome {
    let mut passed = Vec::new();

    let parsed: Value = match serde_json::from_str(strip_fences(raw)) {
        Ok(v) => v,
        Err(e) => return ValidationOutcome::fail(passed, FailureStage::Parse, format!("response is not valid JSON: {e}")),
    };
    passed.push(FailureStage::Parse);

    let entries = match schema_entries(&parsed) {
        Ok(e) => e,
        Err(m) => return ValidationOutcome::fail(passed, FailureStage::Schema, m),
    };
    passed.push(FailureStage::Schema);

    let expected_set: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    let mut duplicates = BTreeSet::new();
    for (name, _) in &entries {
        if !seen.insert(*name) {
            duplicates.insert(*name);
        }
    }
    let missing: Vec<&str> = expected_set.difference(&seen).copied().collect();
    let extra: Vec<&str> = seen.difference(&expected_set).copied().collect();
    if !missing.is_empty() || !extra.is_empty() || !duplicates.is_empty() {
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing variables: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            parts.push(format!("unexpected variables: {}", extra.join(", ")));
        }
        if !duplicates.is_empty() {
            parts.push(format!("duplicated variables: {}", duplicates.into_iter().collect::<Vec<_>>().join(", ")));
        }
        return ValidationOutcome::fail(passed, FailureStage::Coverage, parts.join("; "));
    }
    passed.push(FailureStage::Coverage);

    let mut predictions = BTreeMap::new();
    for (name, value) in entries {
        let Some(meta) = catalog.get(name) else {
            return ValidationOutcome::fail(passed, FailureStage::TypeRange, format!("{name}: not in the question catalog"));
        };
        match normalize(meta, value) {
            Ok(a) => {
                predictions.insert(name.to_string(), a);
            }
            Err(m) => return ValidationOutcome::fail(passed, FailureStage::TypeRange, m),
        }
    }
    passed.push(FailureStage::TypeRange);
    ValidationOutcome {
        passed,
        failure: None,
        predictions: Some(predictions),
    }
}

fn schema_entries(parsed: &Value) -> Result<Vec<(&str, &Value)>, String> {
    let obj = parsed.as_object().ok_or("top level must be an object")?;
    if let Some(k) = obj.keys().find(|k| *k != "predictions") {
        return Err(format!("unexpected top-level key `{k}`"));
    }
    let items = obj
        .get("predictions")
        .ok_or("missing `predictions` array")?
        .as_array()
        .ok_or("`predictions` must be an array")?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let o = item.as_object().ok_or(format!("predictions[{i}] must be an object"))?;
            if let Some(k) = o.keys().find(|k| *k != "variable_name" && *k != "predicted_answer") {
                return Err(format!("predictions[{i}] has unexpected key `{k}`"));
            }
            let name = o
                .get("variable_name")
                .and_then(Value::as_str)
                .ok_or(format!("predictions[{i}].variable_name must be a string"))?;
            let answer = o
                .get("predicted_answer")
                .ok_or(format!("predictions[{i}] is missing predicted_answer"))?;
            Ok((name, answer))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{Category, Representation, StudyKey};

    fn catalog() -> Catalog {
        let cat = |v: &str| QuestionMeta {
            variable_name: v.into(),
            label: v.into(),
            representation: Representation::Ordinal,
            question_type: "t".into(),
            categories: (1..=5).map(|c| Category { code: c, label: format!("c{c}") }).collect(),
            numeric_bounds: None,
            study_key: StudyKey::core("s"),
            domain: "d".into(),
        };
        let num = QuestionMeta {
            variable_name: "hours".into(),
            label: "hours".into(),
            representation: Representation::NumericRange,
            question_type: "t".into(),
            categories: vec![],
            numeric_bounds: Some((0.0, 24.0)),
            study_key: StudyKey::core("s"),
            domain: "d".into(),
        };
        Catalog::new(vec![cat("a"), cat("b"), num]).unwrap()
    }

    fn expected(vs: &[&str]) -> Vec<String> {
        vs.iter().map(|s| s.to_string()).collect()
    }

    fn stage(raw: &str, vs: &[&str]) -> Option<FailureStage> {
        validate_response(raw, &expected(vs), &catalog()).failure.map(|(s, _)| s)
    }

    #[test]
    fn well_formed_in_fence() {
        let raw = "```json\n{\"predictions\": [{\"variable_name\": \"a\", \"predicted_answer\": 3}, {\"variable_name\": \"hours\", \"predicted_answer\": \"7.5\"}]}\n```";
        let out = validate_response(raw, &expected(&["a", "hours"]), &catalog());
        assert!(out.is_ok(), "{out:?}");
        let p = out.predictions.unwrap();
        assert_eq!(p["a"], AnswerCode::Category(3));
        assert_eq!(p["hours"], AnswerCode::Numeric(7.5));
        assert_eq!(out.passed, FailureStage::VALIDATION.to_vec());
    }

    #[test]
    fn stages_short_circuit_in_order() {
        assert_eq!(stage("not json", &["a"]), Some(FailureStage::Parse));
        assert_eq!(stage("[1]", &["a"]), Some(FailureStage::Schema));
        assert_eq!(stage(r#"{"predictions": [], "note": 1}"#, &["a"]), Some(FailureStage::Schema));
        assert_eq!(
            stage(r#"{"predictions": [{"variable_name": "a", "predicted_answer": 1, "why": "x"}]}"#, &["a"]),
            Some(FailureStage::Schema)
        );
        // missing b — coverage, even though a's code is also invalid
        assert_eq!(
            stage(r#"{"predictions": [{"variable_name": "a", "predicted_answer": 9}]}"#, &["a", "b"]),
            Some(FailureStage::Coverage)
        );
        assert_eq!(
            stage(r#"{"predictions": [{"variable_name": "a", "predicted_answer": 1}, {"variable_name": "b", "predicted_answer": 1}]}"#, &["a"]),
            Some(FailureStage::Coverage)
        );
        assert_eq!(
            stage(r#"{"predictions": [{"variable_name": "a", "predicted_answer": 1}, {"variable_name": "a", "predicted_answer": 2}]}"#, &["a"]),
            Some(FailureStage::Coverage)
        );
        assert_eq!(stage(r#"{"predictions": [{"variable_name": "a", "predicted_answer": 9}]}"#, &["a"]), Some(FailureStage::TypeRange));
        assert_eq!(stage(r#"{"predictions": [{"variable_name": "a", "predicted_answer": 2.5}]}"#, &["a"]), Some(FailureStage::TypeRange));
        assert_eq!(stage(r#"{"predictions": [{"variable_name": "hours", "predicted_answer": 25}]}"#, &["hours"]), Some(FailureStage::TypeRange));
        assert_eq!(stage(r#"{"predictions": [{"variable_name": "hours", "predicted_answer": 24}]}"#, &["hours"]), None);
    }

    #[test]
    fn fence_without_language() {
        assert_eq!(strip_fences("```\n{}\n```"), "{}");
        assert_eq!(strip_fences("  {}  "), "{}");
    }
}

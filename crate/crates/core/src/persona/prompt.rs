use crate::panel::{AnswerRecord, Catalog, QuestionMeta};

use super::context::{PersonaArchitecture, PersonaContext};

pub const SYSTEM_PROMPT: &str = include_str!("../../assets/templates/system.txt");
const BACKGROUND_TEMPLATE: &str = include_str!("../../assets/templates/background.txt");
const PROFILE_TEMPLATE: &str = include_str!("../../assets/templates/profile_prediction.txt");
const RETRIEVAL_TEMPLATE: &str = include_str!("../../assets/templates/retrieval_prediction.txt");
const BASELINE_TEMPLATE: &str = include_str!("../../assets/templates/baseline.txt");
pub(crate) const PROFILE_GENERATION_TEMPLATE: &str =
    include_str!("../../assets/templates/profile_generation.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Substitutes `{name}` placeholders in one pass; substituted text is never
/// rescanned and unknown placeholders are left as they are.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> String {
    let template = template.trim_end_matches('\n');
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                let name = &after[..end];
                match values.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn format_number(v: f64) -> String {
    v.to_string()
}

/// One numbered block per question with its variable name, text,
/// representation type, admissible answers and constraint, followed by the
/// required output format.
pub fn render_questions(questions: &[&QuestionMeta]) -> String {
    let mut out = String::new();
    for (i, q) in questions.iter().enumerate() {
        out.push_str(&format!("{}. variable_name: {}\n", i + 1, q.variable_name));
        out.push_str(&format!("   question: {}\n", q.label));
        out.push_str(&format!("   representation type: {}\n", q.representation));
        if q.representation.is_categorical() {
            let options = q
                .categories
                .iter()
                .map(|c| format!("{}={}", c.code, c.label))
                .collect::<Vec<_>>()
                .join("; ");
            out.push_str(&format!("   answer options: {options}\n"));
            out.push_str("   constraint: answer with exactly one category code from the options\n");
        } else {
            let (lo, hi) = q.numeric_bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            let (lo, hi) = (format_number(lo), format_number(hi));
            out.push_str(&format!("   answer range: {lo} to {hi}\n"));
            out.push_str(&format!(
                "   constraint: answer with a single number between {lo} and {hi}\n"
            ));
        }
    }
    out.push_str("\nOutput format:\n");
    out.push_str(
        "{\"predictions\": [{\"variable_name\": \"<variable name>\", \"predicted_answer\": <answer>}]}\n",
    );
    out.push_str("Include every variable listed above exactly once. No other keys.");
    out
}

/// `Q: <label> | options: <categories> | A: <answer label>` for one record.
pub fn render_answer_line(record: &AnswerRecord, meta: &QuestionMeta) -> String {
    let options = if meta.representation.is_categorical() {
        meta.categories
            .iter()
            .map(|c| c.label.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    } else {
        let (lo, hi) = meta.numeric_bounds.unwrap_or((f64::NAN, f64::NAN));
        format!("{} to {}", format_number(lo), format_number(hi))
    };
    format!(
        "Q: {} | options: {} | A: {}",
        meta.label,
        options,
        meta.answer_label(&record.answer)
    )
}

/// Full prior history, one line per record in chronological order (file
/// order within a year).
pub fn render_history(history: &[AnswerRecord], catalog: &Catalog) -> String {
    let mut ordered: Vec<&AnswerRecord> = history.iter().collect();
    ordered.sort_by_key(|r| r.year);
    ordered
        .iter()
        .filter_map(|r| catalog.get(&r.variable_name).map(|m| render_answer_line(r, m)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_prediction_prompt(context: &PersonaContext, questions: &[&QuestionMeta]) -> Prompt {
    let questions_text = render_questions(questions);
    let profile = context.profile.as_deref().unwrap_or("");
    let user = match context.architecture {
        PersonaArchitecture::BackgroundOnly => render_template(
            BACKGROUND_TEMPLATE,
            &[("user_context", &context.background), ("questions_text", &questions_text)],
        ),
        PersonaArchitecture::Profile => render_template(
            PROFILE_TEMPLATE,
            &[
                ("bg_context", &context.background),
                ("structured_profile", profile),
                ("questions_text", &questions_text),
            ],
        ),
        PersonaArchitecture::ProfileLexicalTopK | PersonaArchitecture::ProfileSemanticTopK => {
            let rows = context.retrieved.as_deref().unwrap_or(&[]).join("\n");
            render_template(
                RETRIEVAL_TEMPLATE,
                &[
                    ("bg_context", &context.background),
                    ("structured_profile", profile),
                    ("related_rows_text", &rows),
                    ("questions_text", &questions_text),
                ],
            )
        }
    };
    Prompt {
        system: SYSTEM_PROMPT.to_string(),
        user,
    }
}

/// No-context prompt: question text, variable name, representation type,
/// categories and constraints only.
pub fn render_baseline_prompt(questions: &[&QuestionMeta]) -> Prompt {
    Prompt {
        system: SYSTEM_PROMPT.to_string(),
        user: render_template(BASELINE_TEMPLATE, &[("questions_text", &render_questions(questions))]),
    }
}

/// Appends a rejected response and its validation error for the next attempt.
pub fn append_retry_feedback(user: &str, raw_response: &str, error: &str) -> String {
    format!(
        "{user}\n\nYour previous response was rejected.\nPrevious response:\n{raw_response}\n\nValidation error: {error}\nReturn a corrected response that satisfies every requirement above."
    )
}

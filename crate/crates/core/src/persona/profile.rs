use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::prompt::{append_retry_feedback, render_history, render_template, PROFILE_GENERATION_TEMPLATE, SYSTEM_PROMPT};
use super::PersonaError;
use crate::engine::{Backend, BackendRequest, RequestKind, Unit};
use crate::panel::{AnswerRecord, Catalog, StudyType};

pub const PROFILE_HEADINGS: [&str; 7] = [
    "1. Personality traits",
    "2. Reasoning style",
    "3. Knowledge profile",
    "4. Values and motivations",
    "5. Biases and heuristics",
    "6. Decision patterns",
    "7. Confidence patterns",
];

pub const MAX_PROFILE_WORDS: usize = 1500;
pub const PROFILE_ATTEMPTS: u32 = 3;

/// Whitespace-delimited token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Which of the seven headings start a line (ignoring case, leading
/// whitespace and markdown `#`/`*` decoration).
pub fn heading_flags(text: &str) -> [bool; 7] {
    let mut flags = [false; 7];
    for line in text.lines() {
        let line = line
            .trim_start_matches(|c: char| c.is_whitespace() || c == '#' || c == '*')
            .to_lowercase();
        for (flag, heading) in flags.iter_mut().zip(PROFILE_HEADINGS) {
            if line.starts_with(&heading.to_lowercase()) {
                *flag = true;
            }
        }
    }
    flags
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredProfile {
    pub text: String,
    pub word_count: usize,
    pub sections: [bool; 7],
}

impl StructuredProfile {
    /// Accepts a profile iff all seven headings are present and it has at
    /// most `max_words` words.
    pub fn validate(text: &str, max_words: usize) -> Result<Self, String> {
        let sections = heading_flags(text);
        let missing: Vec<&str> = PROFILE_HEADINGS
            .iter()
            .zip(sections)
            .filter(|(_, present)| !present)
            .map(|(h, _)| *h)
            .collect();
        if !missing.is_empty() {
            return Err(format!("missing required section headings: {}", missing.join(", ")));
        }
        let words = word_count(text);
        if words > max_words {
            return Err(format!("profile has {words} words, the limit is {max_words}"));
        }
        Ok(Self {
            text: text.to_string(),
            word_count: words,
            sections,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProfileCacheKey {
    pub respondent_id: String,
    pub source: String,
    pub cutoff_year: i32,
    pub input_scope: StudyType,
    pub model: String,
}

fn path_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

impl ProfileCacheKey {
    /// `source/cutoff/scope/model/respondent.txt`
    pub fn relative_path(&self) -> PathBuf {
        let scope = match self.input_scope {
            StudyType::Core => "core",
            StudyType::SingleWave => "single_wave",
        };
        PathBuf::from(path_component(&self.source))
            .join(self.cutoff_year.to_string())
            .join(scope)
            .join(path_component(&self.model))
            .join(format!("{}.txt", path_component(&self.respondent_id)))
    }
}

/// On-disk profile cache. Generation for a key is serialized behind a
/// per-key lock, so concurrent requests for the same key make one backend
/// call and everyone else reads the stored result.
#[derive(Debug)]
pub struct ProfileCache {
    root: PathBuf,
    locks: Mutex<HashMap<ProfileCacheKey, Arc<Mutex<()>>>>,
    max_words: usize,
    attempts: u32,
}

impl ProfileCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            locks: Mutex::new(HashMap::new()),
            max_words: MAX_PROFILE_WORDS,
            attempts: PROFILE_ATTEMPTS,
        }
    }

    pub fn with_attempts(mut self, attempts: u32) -> Self {
        assert!(attempts >= 1, "profile generation needs at least one attempt");
        self.attempts = attempts;
        self
    }

    pub fn with_max_words(mut self, max_words: usize) -> Self {
        self.max_words = max_words;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &ProfileCacheKey) -> PathBuf {
        self.root.join(key.relative_path())
    }

    fn lock_for(&self, key: &ProfileCacheKey) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("profile lock table poisoned");
        locks.entry(key.clone()).or_default().clone()
    }

    fn read(&self, key: &ProfileCacheKey) -> Result<Option<StructuredProfile>, PersonaError> {
        let path = self.path_for(key);
        match std::fs::read_to_string(&path) {
            Ok(text) => StructuredProfile::validate(&text, self.max_words)
                .map(Some)
                .map_err(|message| PersonaError::CorruptCache { path: path.display().to_string(), message }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(PersonaError::Io { path: path.display().to_string(), source }),
        }
    }

    fn write(&self, key: &ProfileCacheKey, profile: &StructuredProfile) -> Result<(), PersonaError> {
        let path = self.path_for(key);
        let io = |source| PersonaError::Io { path: path.display().to_string(), source };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        // Write-then-rename so readers never observe a partial file.
        let tmp = path.with_extension("txt.tmp");
        std::fs::write(&tmp, &profile.text).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)
    }

    /// Returns the cached profile for `key`, generating it first if needed.
    pub fn get_or_generate(
        &self,
        key: &ProfileCacheKey,
        history: &[AnswerRecord],
        catalog: &Catalog,
        backend: &dyn Backend,
    ) -> Result<StructuredProfile, PersonaError> {
        let lock = self.lock_for(key);
        let _guard = lock.lock().expect("profile key lock poisoned");
        if let Some(hit) = self.read(key)? {
            return Ok(hit);
        }
        let profile = generate_uncached(key, history, catalog, backend, self.max_words, self.attempts)?;
        self.write(key, &profile)?;
        Ok(profile)
    }
}

/// Generates a structured profile from a respondent's full prior history,
/// going through `cache` so a key is only ever generated once.
pub fn generate_profile(
    history: &[AnswerRecord],
    catalog: &Catalog,
    backend: &dyn Backend,
    key: &ProfileCacheKey,
    cache: &ProfileCache,
) -> Result<StructuredProfile, PersonaError> {
    cache.get_or_generate(key, history, catalog, backend)
}

fn generate_uncached(
    key: &ProfileCacheKey,
    history: &[AnswerRecord],
    catalog: &Catalog,
    backend: &dyn Backend,
    max_words: usize,
    attempts: u32,
) -> Result<StructuredProfile, PersonaError> {
    if history.is_empty() {
        return Err(PersonaError::EmptyHistory(key.respondent_id.clone()));
    }
    let base = render_template(PROFILE_GENERATION_TEMPLATE, &[("history_text", &render_history(history, catalog))]);
    let mut user = base.clone();
    let mut last_error = String::new();
    for attempt in 1..=attempts {
        let request = BackendRequest {
            system: SYSTEM_PROMPT.to_string(),
            user: user.clone(),
            kind: RequestKind::Profile,
            unit: Unit::Respondent(key.respondent_id.clone()),
            variables: Vec::new(),
            attempt,
        };
        let (raw, error) = match backend.complete(&request) {
            Ok(raw) => match StructuredProfile::validate(&raw, max_words) {
                Ok(profile) => return Ok(profile),
                Err(e) => (raw, e),
            },
            Err(e) => (String::new(), e.to_string()),
        };
        user = append_retry_feedback(&base, &raw, &error);
        last_error = error;
    }
    Err(PersonaError::ProfileFailed {
        respondent: key.respondent_id.clone(),
        attempts,
        last_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile_text(words_per_section: usize) -> String {
        PROFILE_HEADINGS
            .iter()
            .map(|h| format!("{h}\n{}", vec!["w"; words_per_section].join(" ")))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn headings_tolerate_markdown_and_case() {
        let text = PROFILE_HEADINGS
            .iter()
            .map(|h| format!("## **{}**", h.to_uppercase()))
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(heading_flags(&text), [true; 7]);
        assert_eq!(heading_flags("text 1. Personality traits"), [false; 7]);
    }

    #[test]
    fn word_cap_boundary() {
        let base = profile_text(0);
        // the seven headings alone are 23 words
        assert_eq!(word_count(&base), 23);
        let at_cap = format!("{base} {}", vec!["x"; 1477].join(" "));
        assert_eq!(word_count(&at_cap), 1500);
        assert!(StructuredProfile::validate(&at_cap, 1500).is_ok());
        let over = format!("{at_cap} y");
        assert!(StructuredProfile::validate(&over, 1500).unwrap_err().contains("1501"));
    }

    #[test]
    fn six_headings_rejected() {
        let text = profile_text(2).replace("7. Confidence patterns", "Confidence");
        let err = StructuredProfile::validate(&text, 1500).unwrap_err();
        assert!(err.contains("7. Confidence patterns"));
    }

    #[test]
    fn cache_layout() {
        let key = ProfileCacheKey {
            respondent_id: "R1".into(),
            source: "panel".into(),
            cutoff_year: 2023,
            input_scope: StudyType::SingleWave,
            model: "org/model:v1".into(),
        };
        assert_eq!(
            key.relative_path(),
            PathBuf::from("panel/2023/single_wave/org_model_v1/R1.txt")
        );
    }
}

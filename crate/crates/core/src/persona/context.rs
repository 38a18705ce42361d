use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PersonaError;
use crate::panel::{Catalog, Respondent};
use crate::retrieval::{Candidate, RetrievalResult};

use super::prompt::render_answer_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaArchitecture {
    BackgroundOnly,
    Profile,
    #[serde(rename = "profile_lexical_topk")]
    ProfileLexicalTopK,
    #[serde(rename = "profile_semantic_topk")]
    ProfileSemanticTopK,
}

impl PersonaArchitecture {
    pub const ALL: [PersonaArchitecture; 4] = [
        PersonaArchitecture::BackgroundOnly,
        PersonaArchitecture::Profile,
        PersonaArchitecture::ProfileLexicalTopK,
        PersonaArchitecture::ProfileSemanticTopK,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PersonaArchitecture::BackgroundOnly => "background_only",
            PersonaArchitecture::Profile => "profile",
            PersonaArchitecture::ProfileLexicalTopK => "profile_lexical_topk",
            PersonaArchitecture::ProfileSemanticTopK => "profile_semantic_topk",
        }
    }

    pub fn needs_profile(self) -> bool {
        !matches!(self, PersonaArchitecture::BackgroundOnly)
    }

    pub fn needs_retrieval(self) -> bool {
        matches!(
            self,
            PersonaArchitecture::ProfileLexicalTopK | PersonaArchitecture::ProfileSemanticTopK
        )
    }
}

impl fmt::Display for PersonaArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PersonaArchitecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown persona architecture `{s}`"))
    }
}

/// Prompt context for one respondent and one sub-batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonaContext {
    pub architecture: PersonaArchitecture,
    pub respondent_id: String,
    /// Rendered 34-variable background block.
    pub background: String,
    pub profile: Option<String>,
    /// Rendered retrieved rows, best first.
    pub retrieved: Option<Vec<String>>,
}

/// Builds the context an architecture calls for, rejecting inputs that do
/// not fit it.
pub fn assemble_context(
    architecture: PersonaArchitecture,
    respondent: &Respondent,
    profile: Option<&str>,
    retrieval: Option<(&RetrievalResult, &[Candidate<'_>])>,
    _catalog: &Catalog,
) -> Result<PersonaContext, PersonaError> {
    let assembly = |m: &str| PersonaError::Assembly(format!("{architecture}: {m}"));
    if architecture.needs_profile() && profile.is_none() {
        return Err(assembly("a structured profile is required"));
    }
    if !architecture.needs_profile() && profile.is_some() {
        return Err(assembly("background-only contexts take no profile"));
    }
    if architecture.needs_retrieval() && retrieval.is_none() {
        return Err(assembly("retrieved rows are required"));
    }
    if !architecture.needs_retrieval() && retrieval.is_some() {
        return Err(assembly("this architecture takes no retrieved rows"));
    }
    let retrieved = retrieval.map(|(result, candidates)| {
        result
            .selected
            .iter()
            .map(|s| {
                let c = candidates[s.index];
                render_answer_line(c.record, c.meta)
            })
            .collect()
    });
    Ok(PersonaContext {
        architecture,
        respondent_id: respondent.id.0.clone(),
        background: respondent.background.render(),
        profile: profile.map(str::to_string),
        retrieved,
    })
}

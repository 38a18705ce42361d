use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use persona_core::persona::PersonaArchitecture;
use persona_core::Task;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::digest::sha256_hex;
use crate::CliError;

/// Everything that determines a run's outputs. Every section is optional;
/// missing keys take the documented defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunManifest {
    pub task: Task,
    pub architectures: Vec<PersonaArchitecture>,
    /// Dataset label recorded in profile cache keys.
    pub source: String,
    pub cutoff_year: i32,
    pub sample_size: usize,
    pub batch_size: usize,
    /// Baseline repeats; defaults to the number of sampled respondents.
    pub baseline_repeats: Option<usize>,
    pub retries: Retries,
    pub evaluation: EvaluationSettings,
    pub seeds: Seeds,
    pub backends: Backends,
    pub remote: Option<RemoteSettings>,
    pub input: InputSettings,
    pub synth: SynthSettings,
    /// Output directory; `--out` takes precedence.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Retries {
    /// Total attempts per prediction sub-batch.
    pub prediction: u32,
    /// Total attempts per structured profile.
    pub profile: u32,
}

impl Default for Retries {
    fn default() -> Self {
        Self {
            prediction: 4,
            profile: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSettings {
    pub resamples: usize,
    pub k_max: usize,
    pub restarts: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            resamples: 100,
            k_max: 7,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub synth: u64,
    pub sampling: u64,
    pub shuffle: u64,
    pub mock: u64,
    pub bootstrap: u64,
    pub clustering: u64,
}

impl Seeds {
    pub const NAMES: [&'static str; 6] = ["synth", "sampling", "shuffle", "mock", "bootstrap", "clustering"];

    pub fn set(&mut self, name: &str, value: u64) -> Result<(), CliError> {
        let slot = match name {
            "synth" => &mut self.synth,
            "sampling" => &mut self.sampling,
            "shuffle" => &mut self.shuffle,
            "mock" => &mut self.mock,
            "bootstrap" => &mut self.bootstrap,
            "clustering" => &mut self.clustering,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown seed `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }

    /// Seed of the within-stratum ranking shuffle. Sampling has no other
    /// random step, so both keys feed it.
    pub fn ranking(&self) -> u64 {
        let digest = sha256_hex(format!("{}:{}", self.sampling, self.shuffle).as_bytes());
        u64::from_str_radix(&digest[..16], 16).expect("hex digest")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Backends {
    /// `mock-oracle`, `mock-noisy-oracle`, `mock-uniform`, `mock-majority` or `remote`.
    pub prediction: String,
    /// `mock-profile` or `remote`.
    pub profile: String,
    /// `hash-<dimension>` or `remote`.
    pub embedding: String,
    /// Share of answers the noisy oracle copies from the truth.
    pub noisy_accuracy: f64,
}

impl Default for Backends {
    fn default() -> Self {
        Self {
            prediction: "mock-oracle".into(),
            profile: "mock-profile".into(),
            embedding: "hash-256".into(),
            noisy_accuracy: 0.7,
        }
    }
}

pub const PREDICTION_BACKENDS: [&str; 5] =
    ["mock-oracle", "mock-noisy-oracle", "mock-uniform", "mock-majority", "remote"];

/// Maps `--backend` short forms to backend ids.
pub fn canonical_backend(name: &str) -> Result<String, CliError> {
    let id = match name {
        "oracle" => "mock-oracle",
        "noisy" | "noisy-oracle" => "mock-noisy-oracle",
        "uniform" => "mock-uniform",
        "majority" => "mock-majority",
        other => other,
    };
    if PREDICTION_BACKENDS.contains(&id) {
        Ok(id.to_string())
    } else {
        Err(CliError::Validation(format!(
            "unknown prediction backend `{name}` (expected one of {})",
            PREDICTION_BACKENDS.join(", ")
        )))
    }
}

/// Remote endpoint settings. The key itself never appears in a manifest,
/// only the name of the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSettings {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    pub profile_model: Option<String>,
    pub embedding_model: Option<String>,
}

fn default_key_env() -> String {
    "PERSONA_API_KEY".into()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSettings {
    /// Directory with background.csv, questions.csv and answers.csv.
    pub dir: Option<PathBuf>,
    /// Expected SHA-256 per input file name; checked by `ingest` when set.
    pub digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    pub respondents: usize,
    /// Full generator configuration (TOML); overrides `respondents`.
    pub config: Option<PathBuf>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            respondents: 600,
            config: None,
        }
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            task: Task::CorePrediction,
            architectures: PersonaArchitecture::ALL.to_vec(),
            source: "panel".into(),
            cutoff_year: 2023,
            sample_size: 500,
            batch_size: 20,
            baseline_repeats: None,
            retries: Retries::default(),
            evaluation: EvaluationSettings::default(),
            seeds: Seeds::default(),
            backends: Backends::default(),
            remote: None,
            input: InputSettings::default(),
            synth: SynthSettings::default(),
            output: None,
        }
    }
}

/// Pipeline stages whose outputs are cached and chained by digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Panel,
    Sample,
    Profile,
    Predict,
    Baseline,
    Evaluate,
    Report,
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let manifest: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Validation(m));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.sample_size == 0 {
            return fail("sample_size must be at least 1".into());
        }
        if self.retries.prediction == 0 || self.retries.profile == 0 {
            return fail("retry caps must allow at least one attempt".into());
        }
        if self.baseline_repeats == Some(0) {
            return fail("baseline_repeats must be at least 1".into());
        }
        if self.evaluation.k_max < 2 {
            return fail("evaluation.k_max must be at least 2".into());
        }
        if self.evaluation.restarts == 0 {
            return fail("evaluation.restarts must be at least 1".into());
        }
        if self.architectures.is_empty() {
            return fail("architectures must list at least one architecture".into());
        }
        if !(0.0..=1.0).contains(&self.backends.noisy_accuracy) {
            return fail("backends.noisy_accuracy must lie in [0, 1]".into());
        }
        canonical_backend(&self.backends.prediction)?;
        if !matches!(self.backends.profile.as_str(), "mock-profile" | "remote") {
            return fail(format!("unknown profile backend `{}`", self.backends.profile));
        }
        if self.backends.embedding != "remote" && self.hash_dimension().is_none() {
            return fail(format!("unknown embedding backend `{}`", self.backends.embedding));
        }
        let uses_remote = [&self.backends.prediction, &self.backends.profile, &self.backends.embedding]
            .iter()
            .any(|b| b.as_str() == "remote");
        if uses_remote && self.remote.is_none() {
            return fail("a remote backend needs a [remote] section".into());
        }
        if self.synth.respondents == 0 {
            return fail("synth.respondents must be at least 1".into());
        }
        Ok(())
    }

    /// Dimension of the hashing embedder named `hash-<d>`.
    pub fn hash_dimension(&self) -> Option<usize> {
        self.backends
            .embedding
            .strip_prefix("hash-")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Digest of the manifest fields a stage's outputs depend on. Fields
    /// that only affect later stages are left out, so changing them keeps
    /// earlier caches valid.
    pub fn stage_digest(&self, stage: Stage) -> String {
        let panel = json!({
            "source": self.source,
            "input_dir": self.input.dir,
            "input_digests": self.input.digests,
            "synth": self.synth,
            "synth_seed": self.seeds.synth,
        });
        let sample = json!({
            "task": self.task,
            "cutoff_year": self.cutoff_year,
            "sample_size": self.sample_size,
            "sampling": self.seeds.sampling,
            "shuffle": self.seeds.shuffle,
        });
        let backends = json!({
            "backends": self.backends,
            "remote": self.remote,
            "mock": self.seeds.mock,
        });
        let prediction = json!({
            "batch_size": self.batch_size,
            "retries": self.retries,
        });
        let evaluation = json!({
            "evaluation": self.evaluation,
            "bootstrap": self.seeds.bootstrap,
            "clustering": self.seeds.clustering,
        });
        let value = match stage {
            Stage::Panel => json!([panel]),
            Stage::Sample => json!([panel, sample]),
            Stage::Profile => json!([panel, sample, backends, self.retries]),
            Stage::Predict => json!([panel, sample, backends, prediction]),
            Stage::Baseline => json!([panel, sample, backends, prediction, self.baseline_repeats]),
            Stage::Evaluate | Stage::Report => json!([panel, sample, evaluation]),
        };
        sha256_hex(value.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_takes_defaults() {
        let m = RunManifest::parse("").unwrap();
        assert_eq!(m, RunManifest::default());
        assert_eq!(m.batch_size, 20);
        assert_eq!((m.retries.prediction, m.retries.profile), (4, 3));
        assert_eq!(m.sample_size, 500);
        assert_eq!(m.cutoff_year, 2023);
        assert_eq!(m.evaluation.resamples, 100);
        assert_eq!(m.evaluation.k_max, 7);
        assert_eq!(m.architectures.len(), 4);
    }

    #[test]
    fn zero_batch_size_is_rejected() {
        assert!(matches!(RunManifest::parse("batch_size = 0"), Err(CliError::Validation(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunManifest::parse("foo = 1").unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
        assert!(RunManifest::parse("[seeds]\nfoo = 1").is_err());
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = RunManifest::parse("sample_size = \"many\"").unwrap_err();
        assert!(err.to_string().contains("sample_size"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut m = RunManifest {
            architectures: vec![PersonaArchitecture::ProfileLexicalTopK],
            ..RunManifest::default()
        };
        m.seeds.mock = 9;
        assert_eq!(RunManifest::parse(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn later_settings_leave_earlier_digests_alone() {
        let a = RunManifest::default();
        let mut b = a.clone();
        b.evaluation.resamples = 7;
        assert_eq!(a.stage_digest(Stage::Predict), b.stage_digest(Stage::Predict));
        assert_ne!(a.stage_digest(Stage::Evaluate), b.stage_digest(Stage::Evaluate));
        b.sample_size = 10;
        assert_eq!(a.stage_digest(Stage::Panel), b.stage_digest(Stage::Panel));
        assert_ne!(a.stage_digest(Stage::Sample), b.stage_digest(Stage::Sample));
    }
}

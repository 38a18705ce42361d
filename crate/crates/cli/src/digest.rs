//! Stage records chaining outputs to the inputs they were built from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Written next to a stage's outputs. Paths are relative to the output
/// directory, so a run directory can be moved as a whole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub manifest: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl StageRecord {
    pub fn new(stage: &str, manifest: String) -> Self {
        Self {
            stage: stage.to_string(),
            manifest,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Record file of `stage` inside `dir`.
    pub fn path(dir: &Path, stage: &str) -> PathBuf {
        dir.join(format!("{stage}.stage.json"))
    }

    pub fn add_output(&mut self, root: &Path, path: &Path) -> Result<(), CliError> {
        self.outputs.insert(relative(root, path), file_digest(path)?);
        Ok(())
    }

    /// Takes over the outputs of an upstream record as inputs.
    pub fn add_inputs_from(&mut self, upstream: &StageRecord) {
        self.inputs.extend(upstream.outputs.iter().map(|(k, v)| (k.clone(), v.clone())));
    }

    pub fn add_input(&mut self, root: &Path, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(relative(root, path), file_digest(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = Self::path(dir, &self.stage);
        let text = serde_json::to_string_pretty(self).expect("stage record serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    /// Loads the record of `stage` from `dir` and checks that it was built
    /// under `manifest` (when given) and that its inputs and outputs are
    /// unchanged. `command` names the subcommand that produces the stage.
    pub fn verify(
        root: &Path,
        dir: &Path,
        stage: &str,
        manifest: Option<&str>,
        command: &str,
    ) -> Result<Self, CliError> {
        let path = Self::path(dir, stage);
        if !path.exists() {
            return Err(CliError::Missing {
                what: format!("{stage} outputs in {}", dir.display()),
                command: command.to_string(),
            });
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let record: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Stale(format!("{} is unreadable ({e}); rerun `persona {command}`", path.display())))?;
        if manifest.is_some_and(|m| m != record.manifest) {
            return Err(CliError::Stale(format!(
                "{stage} outputs were built under different manifest settings; rerun `persona {command}`"
            )));
        }
        for (rel, expected) in record.inputs.iter().chain(&record.outputs) {
            let file = root.join(rel);
            let actual = if file.exists() { Some(file_digest(&file)?) } else { None };
            if actual.as_deref() != Some(expected.as_str()) {
                return Err(CliError::Stale(format!(
                    "{rel} changed or disappeared since `{command}` ran; rerun `persona {command}`"
                )));
            }
        }
        Ok(record)
    }
}

pub fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

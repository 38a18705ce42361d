//! Staged command-line pipeline: every subcommand reads the artifacts of
//! the stages before it, checks their digests, and writes its own outputs
//! with a stage record.
//!
//! Layout of an output directory:
//!
//! ```text
//! panel/                              background, questions, answers (+ synth truth)
//! sample/<task>/                      sample.json, allocation.json
//! profiles/                           structured profile cache
//! embeddings/<model>.json             question embeddings (semantic retrieval)
//! runs/<task>/<setting>/<backend>/    predictions.csv, summary.json, manifest.toml, metrics.csv
//! reports/<task>/                     metrics.csv and the report bundle
//! ```

pub mod digest;
pub mod manifest;
mod stages;

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use persona_core::persona::PersonaArchitecture;
use thiserror::Error;

pub use manifest::{canonical_backend, RunManifest, Stage};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("missing {what}; run `persona {command}` first")]
    Missing { what: String, command: String },
    #[error("stale input: {0}")]
    Stale(String),
    #[error("backend exhausted: {0}")]
    Exhausted(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 0 success, 1 I/O or internal failure, 2 validation, 3 stale or
    /// missing input, 4 backend exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Missing { .. } | CliError::Stale(_) => 3,
            CliError::Exhausted(_) => 4,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "persona", version, about = "Persona prediction and reliability evaluation pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run manifest (TOML). Without one, every setting takes its default.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory (overrides the manifest's `output`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed override `name=value` (synth, sampling, shuffle, mock,
    /// bootstrap, clustering) or a bare value for all seeds. Repeatable.
    #[arg(long = "seed", global = true, value_name = "NAME=VALUE")]
    pub seeds: Vec<String>,
    /// Prediction backend: oracle, noisy, uniform, majority or remote.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Maximum number of in-flight backend requests.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Bootstrap resamples for `evaluate`.
    #[arg(long, global = true)]
    pub resamples: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate panel CSVs and copy them into the output directory.
    Ingest {
        /// Directory with background.csv, questions.csv and answers.csv.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Generate a synthetic panel.
    Synth,
    /// Draw the stratified respondent sample for the task.
    Sample,
    /// Generate structured profiles for the sampled respondents.
    Profile,
    /// Run persona predictions for each architecture.
    Predict {
        /// Restrict to these architectures (default: the manifest's list).
        #[arg(long = "architecture")]
        architectures: Vec<PersonaArchitecture>,
    },
    /// Run the no-context baseline.
    Baseline,
    /// Score every prediction file of the task on all six dimensions.
    Evaluate,
    /// Write the analysis bundle.
    Report {
        /// Skip the SVG heatmaps.
        #[arg(long)]
        no_svg: bool,
    },
}

/// Manifest with command-line overrides applied.
pub fn effective_manifest(global: &GlobalArgs) -> Result<RunManifest, CliError> {
    let mut manifest = match &global.manifest {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest::default(),
    };
    for spec in &global.seeds {
        match spec.split_once('=') {
            Some((name, value)) => {
                let value = parse_seed(value)?;
                manifest.seeds.set(name.trim(), value)?;
            }
            None => {
                let value = parse_seed(spec)?;
                for name in manifest::Seeds::NAMES {
                    manifest.seeds.set(name, value)?;
                }
            }
        }
    }
    if let Some(b) = &global.backend {
        manifest.backends.prediction = canonical_backend(b)?;
    }
    if let Some(r) = global.resamples {
        manifest.evaluation.resamples = r;
    }
    if let Some(out) = &global.out {
        manifest.output = Some(out.clone());
    }
    manifest.validate()?;
    Ok(manifest)
}

fn parse_seed(text: &str) -> Result<u64, CliError> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("seed `{text}` is not a non-negative integer")))
}

/// Exclusive ownership of an output directory for one invocation.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(root: &Path) -> Result<Self, CliError> {
        let path = root.join(".persona.lock");
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Validation(format!(
                    "{} is in use by another invocation (delete {} if that run died)",
                    root.display(),
                    path.display()
                ))
            } else {
                CliError::io(&path, e)
            }
        })?;
        let _ = writeln!(file, "{}", std::process::id());
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let manifest = effective_manifest(&cli.global)?;
    let root = manifest
        .output
        .clone()
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set `output`".into()))?;
    std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    let _lock = DirLock::acquire(&root)?;
    let jobs = cli
        .global
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    // The copy lives inside the output directory, so it omits that path and
    // stays identical wherever the run is placed.
    let path = root.join("manifest.toml");
    let recorded = RunManifest { output: None, ..manifest.clone() };
    std::fs::write(&path, recorded.to_toml()).map_err(|e| CliError::io(&path, e))?;

    let ctx = stages::Context::new(root, manifest, jobs);
    match &cli.command {
        Command::Ingest { input } => ctx.ingest(input.as_deref()),
        Command::Synth => ctx.synth(),
        Command::Sample => ctx.sample(),
        Command::Profile => ctx.profile(),
        Command::Predict { architectures } => ctx.predict(architectures),
        Command::Baseline => ctx.baseline(),
        Command::Evaluate => ctx.evaluate(),
        Command::Report { no_svg } => ctx.report(!no_svg),
    }
}

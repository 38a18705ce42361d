use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use persona_core::analysis::{build_report, ReportInputs, SettingRun, REPORT_FILES};
use persona_core::engine::mock::{
    truth_from_split, MajorityBackend, NoisyOracleBackend, OracleBackend, ProfileMockBackend, UniformBackend,
};
use persona_core::engine::{run_baseline, run_task, Backend, PredictionSet, TaskRun, BASELINE_SETTING};
use persona_core::metrics::{
    read_metric_report, write_metric_report, Dimension, Evaluation, MetricRow, MetricValue, MetricsConfig,
    ResponseMatrix,
};
use persona_core::panel::synth::{generate_synthetic_panel, SynthConfig};
use persona_core::panel::{load_panel, save_panel, split_by_cutoff, PanelPaths};
use persona_core::persona::{generate_profile, PersonaArchitecture, ProfileCache, ProfileCacheKey};
use persona_core::retrieval::{Embedder, EmbeddingStore, HashEmbedder, Stopwords};
use persona_core::sampling::{allocation_accuracy, Sample, Stratum};
use persona_core::{Catalog, Panel, QuestionMeta, RespondentId, TaskSplit};
use serde::Serialize;

use crate::digest::{file_digest, relative, StageRecord};
use crate::manifest::{RunManifest, Stage};
use crate::CliError;

const PANEL_FILES: [&str; 3] = ["background.csv", "questions.csv", "answers.csv"];

pub(crate) struct Context {
    root: PathBuf,
    manifest: RunManifest,
    jobs: usize,
}

/// Panel, split and sample as verified by their stage records.
struct Prepared {
    panel: Panel,
    split: TaskSplit,
    sample: Sample,
    panel_record: StageRecord,
    sample_record: StageRecord,
}

/// One prediction file found under `runs/<task>/`.
struct RunDir {
    setting: String,
    backend: String,
    dir: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

impl Context {
    pub(crate) fn new(root: PathBuf, manifest: RunManifest, jobs: usize) -> Self {
        Self { root, manifest, jobs }
    }

    fn digest(&self, stage: Stage) -> String {
        self.manifest.stage_digest(stage)
    }

    fn task(&self) -> &'static str {
        self.manifest.task.as_str()
    }

    fn panel_dir(&self) -> PathBuf {
        self.root.join("panel")
    }

    fn sample_dir(&self) -> PathBuf {
        self.root.join("sample").join(self.task())
    }

    fn runs_dir(&self) -> PathBuf {
        self.root.join("runs").join(self.task())
    }

    fn reports_dir(&self) -> PathBuf {
        self.root.join("reports").join(self.task())
    }

    fn profile_cache(&self) -> ProfileCache {
        ProfileCache::new(self.root.join("profiles")).with_attempts(self.manifest.retries.profile)
    }

    // ---- panel -------------------------------------------------------------

    fn write_panel_stage(&self, panel: &Panel, extra: &[PathBuf]) -> Result<(), CliError> {
        let dir = self.panel_dir();
        create_dir(&dir)?;
        save_panel(panel, &PanelPaths::in_dir(&dir)).map_err(internal)?;
        let mut record = StageRecord::new("panel", self.digest(Stage::Panel));
        for name in PANEL_FILES {
            record.add_output(&self.root, &dir.join(name))?;
        }
        for path in extra {
            record.add_output(&self.root, path)?;
        }
        record.write(&dir)
    }

    pub(crate) fn ingest(&self, input: Option<&Path>) -> Result<(), CliError> {
        let dir = input
            .map(Path::to_path_buf)
            .or_else(|| self.manifest.input.dir.clone())
            .ok_or_else(|| CliError::Validation("ingest needs --input or `input.dir` in the manifest".into()))?;
        for (name, expected) in &self.manifest.input.digests {
            let actual = file_digest(&dir.join(name))?;
            if !actual.eq_ignore_ascii_case(expected) {
                return Err(CliError::Stale(format!(
                    "{} does not match the digest recorded in the manifest",
                    dir.join(name).display()
                )));
            }
        }
        let panel = load_panel(&PanelPaths::in_dir(&dir)).map_err(|e| CliError::Validation(e.to_string()))?;
        let digests: std::collections::BTreeMap<&str, String> = PANEL_FILES
            .iter()
            .map(|name| Ok((*name, file_digest(&dir.join(name))?)))
            .collect::<Result<_, CliError>>()?;
        create_dir(&self.panel_dir())?;
        let path = self.panel_dir().join("input_digests.json");
        write_json(&path, &digests)?;
        self.write_panel_stage(&panel, &[path])?;
        log::info!(
            "ingested {} respondents, {} questions, {} answers",
            panel.respondents().len(),
            panel.catalog().len(),
            panel.answers().len()
        );
        Ok(())
    }

    pub(crate) fn synth(&self) -> Result<(), CliError> {
        let config = match &self.manifest.synth.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                SynthConfig::from_toml(&text).map_err(|e| CliError::Validation(e.to_string()))?
            }
            None => {
                let mut c = SynthConfig::with_respondents(self.manifest.synth.respondents);
                c.cutoff_year = self.manifest.cutoff_year;
                c
            }
        };
        let synth = generate_synthetic_panel(&config, self.manifest.seeds.synth)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        create_dir(&self.panel_dir())?;
        let truth = self.panel_dir().join("synth_truth.json");
        write_json(&truth, &synth.truth)?;
        self.write_panel_stage(&synth.panel, &[truth])
    }

    fn load_panel(&self) -> Result<(Panel, StageRecord), CliError> {
        let dir = self.panel_dir();
        let record = StageRecord::verify(&self.root, &dir, "panel", Some(&self.digest(Stage::Panel)), "synth` or `persona ingest")?;
        let panel = load_panel(&PanelPaths::in_dir(&dir)).map_err(|e| CliError::Stale(e.to_string()))?;
        Ok((panel, record))
    }

    // ---- sample ------------------------------------------------------------

    pub(crate) fn sample(&self) -> Result<(), CliError> {
        let (panel, panel_record) = self.load_panel()?;
        let split = split_by_cutoff(&panel, self.manifest.task, self.manifest.cutoff_year);
        let sample = persona_core::sampling::select_sample(
            &split,
            &panel,
            self.manifest.sample_size,
            self.manifest.seeds.ranking(),
        )
        .map_err(|e| CliError::Validation(e.to_string()))?;
        let accuracy = allocation_accuracy(&sample.stratum_counts(), &sample.plan.available(), sample.plan.n)
            .map_err(|e| CliError::Validation(e.to_string()))?;

        let dir = self.sample_dir();
        create_dir(&dir)?;
        let sample_path = dir.join("sample.json");
        write_json(&sample_path, &sample)?;
        let allocation_path = dir.join("allocation.json");
        write_json(&allocation_path, &serde_json::json!({ "plan": sample.plan, "accuracy": accuracy }))?;

        let mut record = StageRecord::new("sample", self.digest(Stage::Sample));
        record.add_inputs_from(&panel_record);
        record.add_output(&self.root, &sample_path)?;
        record.add_output(&self.root, &allocation_path)?;
        record.write(&dir)?;
        log::info!("sampled {} respondents (MAD {:.4}, MaxD {:.4})", sample.respondents.len(), accuracy.mad, accuracy.max_d);
        Ok(())
    }

    fn prepare(&self) -> Result<Prepared, CliError> {
        let (panel, panel_record) = self.load_panel()?;
        let dir = self.sample_dir();
        let sample_record = StageRecord::verify(&self.root, &dir, "sample", Some(&self.digest(Stage::Sample)), "sample")?;
        let path = dir.join("sample.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let sample: Sample = serde_json::from_str(&text).map_err(|e| CliError::Stale(format!("{}: {e}", path.display())))?;
        let split = split_by_cutoff(&panel, self.manifest.task, self.manifest.cutoff_year);
        Ok(Prepared {
            panel,
            split,
            sample,
            panel_record,
            sample_record,
        })
    }

    // ---- backends ----------------------------------------------------------

    fn prediction_backend(&self, p: &Prepared) -> Result<Box<dyn Backend>, CliError> {
        let catalog = Arc::new(p.panel.catalog().clone());
        let seed = self.manifest.seeds.mock;
        Ok(match self.manifest.backends.prediction.as_str() {
            "mock-oracle" => Box::new(
                OracleBackend::new(truth_from_split(&p.split), catalog)
                    .with_repeat_respondents(p.sample.respondents.iter().map(|r| r.0.clone()).collect()),
            ),
            "mock-noisy-oracle" => Box::new(NoisyOracleBackend::new(
                truth_from_split(&p.split),
                catalog,
                self.manifest.backends.noisy_accuracy,
                seed,
            )),
            "mock-uniform" => Box::new(UniformBackend::new(catalog, seed)),
            "mock-majority" => Box::new(MajorityBackend::from_split(&p.split)),
            "remote" => self.remote_chat(None)?,
            other => return Err(CliError::Validation(format!("unknown prediction backend `{other}`"))),
        })
    }

    fn profile_backend(&self) -> Result<Box<dyn Backend>, CliError> {
        match self.manifest.backends.profile.as_str() {
            "remote" => {
                let model = self.manifest.remote.as_ref().and_then(|r| r.profile_model.clone());
                self.remote_chat(model)
            }
            _ => Ok(Box::new(ProfileMockBackend::new())),
        }
    }

    #[cfg(feature = "remote")]
    fn remote_config(&self, model: Option<String>) -> Result<persona_core::engine::remote::RemoteConfig, CliError> {
        let r = self
            .manifest
            .remote
            .as_ref()
            .ok_or_else(|| CliError::Validation("a remote backend needs a [remote] section".into()))?;
        Ok(persona_core::engine::remote::RemoteConfig {
            endpoint: r.endpoint.clone(),
            model: model.unwrap_or_else(|| r.model.clone()),
            api_key_env: r.api_key_env.clone(),
            timeout: std::time::Duration::from_secs(r.timeout_secs),
        })
    }

    #[cfg(feature = "remote")]
    fn remote_chat(&self, model: Option<String>) -> Result<Box<dyn Backend>, CliError> {
        let config = self.remote_config(model)?;
        let backend = persona_core::engine::remote::ChatBackend::new(config)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Box::new(backend))
    }

    #[cfg(not(feature = "remote"))]
    fn remote_chat(&self, _model: Option<String>) -> Result<Box<dyn Backend>, CliError> {
        Err(CliError::Validation("this build has no remote backend support (enable the `remote` feature)".into()))
    }

    fn embedder(&self) -> Result<Box<dyn Embedder>, CliError> {
        if let Some(d) = self.manifest.hash_dimension() {
            return Ok(Box::new(HashEmbedder::new(d)));
        }
        #[cfg(feature = "remote")]
        {
            let model = self.manifest.remote.as_ref().and_then(|r| r.embedding_model.clone());
            let embedder = persona_core::engine::remote::RemoteEmbedder::new(self.remote_config(model)?)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Ok(Box::new(embedder))
        }
        #[cfg(not(feature = "remote"))]
        Err(CliError::Validation("this build has no remote embedding support (enable the `remote` feature)".into()))
    }

    /// Loads the question embeddings, computing and caching them first if
    /// needed. Returns the store and its sidecar path.
    fn embeddings(&self, catalog: &Catalog) -> Result<(EmbeddingStore, PathBuf), CliError> {
        let embedder = self.embedder()?;
        let dir = self.root.join("embeddings");
        create_dir(&dir)?;
        let name: String = embedder
            .model()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        let path = dir.join(format!("{name}.json"));
        if path.exists() {
            let store = EmbeddingStore::load(&path).map_err(|e| CliError::Stale(e.to_string()))?;
            let complete = catalog.questions().iter().all(|q| store.get(&q.variable_name).is_ok());
            if store.model() == embedder.model() && complete {
                return Ok((store, path));
            }
        }
        let store = EmbeddingStore::build(catalog.questions(), embedder.as_ref()).map_err(|e| CliError::Exhausted(e.to_string()))?;
        store.save(&path).map_err(internal)?;
        Ok((store, path))
    }

    // ---- profile -----------------------------------------------------------

    pub(crate) fn profile(&self) -> Result<(), CliError> {
        let p = self.prepare()?;
        let backend = self.profile_backend()?;
        let cache = self.profile_cache();
        let catalog = p.panel.catalog();
        let ids: Vec<&RespondentId> = p.sample.respondents.iter().filter(|id| !p.split.prior(id).is_empty()).collect();
        let results = parallel_map(&ids, self.jobs, |id| {
            let key = self.profile_key(id, backend.as_ref());
            generate_profile(p.split.prior(id), catalog, backend.as_ref(), &key, &cache)
                .map(|_| cache.path_for(&key))
                .map_err(|e| format!("{id}: {e}"))
        });

        let dir = self.root.join("profiles").join(self.task());
        create_dir(&dir)?;
        let mut record = StageRecord::new("profile", self.digest(Stage::Profile));
        record.add_inputs_from(&p.panel_record);
        record.add_inputs_from(&p.sample_record);
        let mut failures = Vec::new();
        for result in results {
            match result {
                Ok(path) => record.add_output(&self.root, &path)?,
                Err(e) => failures.push(e),
            }
        }
        record.write(&dir)?;
        if failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Exhausted(format!(
                "{} profiles could not be generated; first: {}",
                failures.len(),
                failures[0]
            )))
        }
    }

    fn profile_key(&self, id: &RespondentId, backend: &dyn Backend) -> ProfileCacheKey {
        ProfileCacheKey {
            respondent_id: id.0.clone(),
            source: self.manifest.source.clone(),
            cutoff_year: self.manifest.cutoff_year,
            input_scope: self.manifest.task.input_scope(),
            model: backend.id().to_string(),
        }
    }

    // ---- predict / baseline -------------------------------------------------

    fn run_dir(&self, setting: &str, backend: &str) -> PathBuf {
        self.runs_dir().join(setting).join(backend)
    }

    /// Writes a prediction set with its summary and manifest copy, and
    /// returns a description of any exhaustion.
    fn write_run(
        &self,
        set: &PredictionSet,
        backend: &str,
        mut record: StageRecord,
    ) -> Result<Option<String>, CliError> {
        let dir = self.run_dir(&set.setting, backend);
        create_dir(&dir)?;
        let predictions = dir.join("predictions.csv");
        set.write_csv(&predictions).map_err(internal)?;
        let summary = set.summary();
        let summary_path = dir.join("summary.json");
        write_json(&summary_path, &summary)?;
        let manifest_path = dir.join("manifest.toml");
        // Without the output path, so identical runs in different
        // directories carry identical manifests.
        let mut manifest = self.manifest.clone();
        manifest.output = None;
        std::fs::write(&manifest_path, manifest.to_toml()).map_err(|e| CliError::io(&manifest_path, e))?;
        for path in [&predictions, &summary_path, &manifest_path] {
            record.add_output(&self.root, path)?;
        }
        record.write(&dir)?;
        log::info!(
            "{}: {} records, {} missing, {} skipped respondents",
            set.setting,
            summary.records,
            summary.missing,
            summary.skipped.len()
        );
        Ok((summary.missing > 0 || !summary.skipped.is_empty()).then(|| {
            format!(
                "{} ({backend}): {} predictions missing after retries, {} respondents skipped",
                set.setting,
                summary.missing,
                summary.skipped.len()
            )
        }))
    }

    pub(crate) fn predict(&self, only: &[PersonaArchitecture]) -> Result<(), CliError> {
        let p = self.prepare()?;
        let architectures: Vec<PersonaArchitecture> =
            if only.is_empty() { self.manifest.architectures.clone() } else { only.to_vec() };
        let catalog = p.panel.catalog();
        let backend = self.prediction_backend(&p)?;
        let needs_profiles = architectures.iter().any(|a| a.needs_profile());
        let profile_backend = if needs_profiles { Some(self.profile_backend()?) } else { None };
        let cache = self.profile_cache();
        let embeddings = if architectures.contains(&PersonaArchitecture::ProfileSemanticTopK) {
            Some(self.embeddings(catalog)?)
        } else {
            None
        };
        let stopwords = Stopwords::default();

        let mut problems = Vec::new();
        for architecture in architectures {
            let profiles = match (&profile_backend, architecture.needs_profile()) {
                (Some(b), true) => Some((b.as_ref(), &cache)),
                _ => None,
            };
            let run = TaskRun {
                panel: &p.panel,
                split: &p.split,
                respondents: &p.sample.respondents,
                architecture,
                backend: backend.as_ref(),
                profiles,
                source: &self.manifest.source,
                embeddings: embeddings.as_ref().map(|(s, _)| s),
                stopwords: &stopwords,
                batch_size: self.manifest.batch_size,
                retry_cap: self.manifest.retries.prediction,
                jobs: self.jobs,
            };
            let set = run_task(&run).map_err(|e| CliError::Validation(e.to_string()))?;

            let mut record = StageRecord::new("predict", self.digest(Stage::Predict));
            record.add_inputs_from(&p.panel_record);
            record.add_inputs_from(&p.sample_record);
            if architecture == PersonaArchitecture::ProfileSemanticTopK {
                if let Some((_, path)) = &embeddings {
                    record.add_input(&self.root, path)?;
                }
            }
            if let Some((b, cache)) = profiles {
                for id in &p.sample.respondents {
                    let path = cache.path_for(&self.profile_key(id, b));
                    if path.exists() {
                        record.add_input(&self.root, &path)?;
                    }
                }
            }
            problems.extend(self.write_run(&set, backend.id(), record)?);
        }
        exhausted(problems)
    }

    pub(crate) fn baseline(&self) -> Result<(), CliError> {
        let p = self.prepare()?;
        let catalog = p.panel.catalog();
        let backend = self.prediction_backend(&p)?;
        let x = ResponseMatrix::truth(&p.split, &p.sample.respondents, catalog);
        let questions: Vec<&QuestionMeta> = x.variables().iter().filter_map(|v| catalog.get(v)).collect();
        let repeats = self.manifest.baseline_repeats.unwrap_or(x.n_rows());
        let set = run_baseline(
            &questions,
            repeats,
            backend.as_ref(),
            catalog,
            self.manifest.batch_size,
            self.manifest.retries.prediction,
            self.jobs,
        )
        .map_err(|e| CliError::Validation(e.to_string()))?;
        let mut record = StageRecord::new("baseline", self.digest(Stage::Baseline));
        record.add_inputs_from(&p.panel_record);
        record.add_inputs_from(&p.sample_record);
        let problem = self.write_run(&set, backend.id(), record)?;
        exhausted(problem.into_iter().collect())
    }

    // ---- evaluate / report --------------------------------------------------

    /// Prediction files under `runs/<task>/`, sorted by setting then backend.
    fn discover_runs(&self) -> Result<Vec<RunDir>, CliError> {
        let mut out = Vec::new();
        let root = self.runs_dir();
        for setting in sorted_subdirs(&root)? {
            for backend in sorted_subdirs(&root.join(&setting))? {
                let dir = root.join(&setting).join(&backend);
                if dir.join("predictions.csv").exists() {
                    out.push(RunDir { setting: setting.clone(), backend, dir });
                }
            }
        }
        if out.is_empty() {
            return Err(CliError::Missing {
                what: format!("prediction files under {}", root.display()),
                command: "predict` or `persona baseline".into(),
            });
        }
        Ok(out)
    }

    /// Setting label in aggregated tables: the architecture alone when one
    /// backend produced every run, `setting@backend` otherwise.
    fn labels(runs: &[RunDir]) -> Vec<String> {
        let backends: BTreeSet<&str> = runs.iter().map(|r| r.backend.as_str()).collect();
        runs.iter()
            .map(|r| if backends.len() == 1 { r.setting.clone() } else { format!("{}@{}", r.setting, r.backend) })
            .collect()
    }

    fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            resamples: self.manifest.evaluation.resamples,
            seed: self.manifest.seeds.bootstrap,
            clustering_seed: self.manifest.seeds.clustering,
            k_max: self.manifest.evaluation.k_max,
            restarts: self.manifest.evaluation.restarts,
            gamma: None,
        }
    }

    fn load_predictions(&self, run: &RunDir, catalog: &Catalog, x: &ResponseMatrix) -> Result<ResponseMatrix, CliError> {
        let stage = if run.setting == BASELINE_SETTING { "baseline" } else { "predict" };
        StageRecord::verify(&self.root, &run.dir, stage, None, stage)?;
        let set = PredictionSet::read_csv(&run.dir.join("predictions.csv"), catalog)
            .map_err(|e| CliError::Stale(e.to_string()))?;
        if set.is_baseline() {
            let repeats = set.summary().units;
            if repeats != x.n_rows() {
                return Err(CliError::Validation(format!(
                    "baseline has {repeats} repeats but the sample has {} respondents; rerun `baseline` with matching repeats",
                    x.n_rows()
                )));
            }
        }
        ResponseMatrix::predictions(&set, x).map_err(|e| CliError::Validation(e.to_string()))
    }

    fn truth_and_strata<'p>(&self, p: &'p Prepared) -> (ResponseMatrix, Vec<&'p Stratum>) {
        let x = ResponseMatrix::truth(&p.split, &p.sample.respondents, p.panel.catalog());
        let strata = x
            .respondents()
            .iter()
            .map(|id| &p.sample.strata[&RespondentId::new(id.clone())])
            .collect();
        (x, strata)
    }

    pub(crate) fn evaluate(&self) -> Result<(), CliError> {
        let p = self.prepare()?;
        let catalog = p.panel.catalog();
        let runs = self.discover_runs()?;
        let labels = Self::labels(&runs);
        let (x, strata) = self.truth_and_strata(&p);
        let config = self.metrics_config();

        let reports = self.reports_dir();
        create_dir(&reports)?;
        let mut record = StageRecord::new("evaluate", self.digest(Stage::Evaluate));
        record.add_inputs_from(&p.panel_record);
        record.add_inputs_from(&p.sample_record);
        let mut all_rows = Vec::new();
        for (run, label) in runs.iter().zip(&labels) {
            let xhat = self.load_predictions(run, catalog, &x)?;
            let eval = Evaluation::new(&x, &xhat, catalog, strata.clone()).map_err(|e| CliError::Validation(e.to_string()))?;
            let rows: Vec<MetricRow> = eval
                .evaluate(&config)
                .into_iter()
                .map(|m| MetricRow {
                    task: self.task().to_string(),
                    setting: label.clone(),
                    dimension: m.dimension.to_string(),
                    slice: "all".into(),
                    value: m.value,
                    se: m.se.is_finite().then_some(m.se),
                    resamples: m.resamples,
                })
                .collect();
            let path = run.dir.join("metrics.csv");
            write_metric_report(&path, &rows).map_err(internal)?;
            record.add_input(&self.root, &run.dir.join("predictions.csv"))?;
            record.add_output(&self.root, &path)?;
            all_rows.extend(rows);
        }
        let path = reports.join("metrics.csv");
        write_metric_report(&path, &all_rows).map_err(internal)?;
        record.add_output(&self.root, &path)?;
        record.write(&reports)
    }

    pub(crate) fn report(&self, svg: bool) -> Result<(), CliError> {
        let p = self.prepare()?;
        let catalog = p.panel.catalog();
        let reports = self.reports_dir();
        let evaluated = StageRecord::verify(&self.root, &reports, "evaluate", Some(&self.digest(Stage::Evaluate)), "evaluate")?;
        // Exactly the runs that were evaluated, even if more appeared since.
        let evaluated_inputs: BTreeSet<&String> = evaluated.inputs.keys().collect();
        let runs: Vec<RunDir> = self
            .discover_runs()?
            .into_iter()
            .filter(|r| evaluated_inputs.contains(&relative(&self.root, &r.dir.join("predictions.csv"))))
            .collect();
        let labels = Self::labels(&runs);
        let (x, strata) = self.truth_and_strata(&p);

        let mut matrices = Vec::new();
        let mut metrics = Vec::new();
        for run in &runs {
            matrices.push(self.load_predictions(run, catalog, &x)?);
            let rows = read_metric_report(&run.dir.join("metrics.csv")).map_err(|e| CliError::Stale(e.to_string()))?;
            let values = rows
                .iter()
                .filter(|r| r.slice == "all")
                .map(|r| {
                    let dimension: Dimension = r.dimension.parse().map_err(CliError::Stale)?;
                    Ok(MetricValue {
                        dimension,
                        value: r.value,
                        se: r.se.unwrap_or(f64::NAN),
                        resamples: r.resamples,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            metrics.push(values);
        }
        let inputs = ReportInputs {
            task: self.task().to_string(),
            x: &x,
            catalog,
            strata: strata.clone(),
            settings: labels
                .iter()
                .zip(&matrices)
                .zip(metrics)
                .map(|((label, xhat), metrics)| SettingRun {
                    setting: label.clone(),
                    xhat,
                    metrics,
                })
                .collect(),
        };
        let bundle = build_report(&inputs).map_err(internal)?;
        // Old heatmaps of settings that are gone must not linger.
        for entry in std::fs::read_dir(&reports).map_err(|e| CliError::io(&reports, e))?.flatten() {
            if entry.path().extension().is_some_and(|e| e == "svg") {
                std::fs::remove_file(entry.path()).map_err(|e| CliError::io(&entry.path(), e))?;
            }
        }
        bundle.write(&reports, svg).map_err(internal)?;

        let mut record = StageRecord::new("report", self.digest(Stage::Report));
        record.add_inputs_from(&evaluated);
        for name in REPORT_FILES {
            record.add_output(&self.root, &reports.join(name))?;
        }
        let mut svgs: Vec<PathBuf> = std::fs::read_dir(&reports)
            .map_err(|e| CliError::io(&reports, e))?
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "svg"))
            .collect();
        svgs.sort();
        for path in &svgs {
            record.add_output(&self.root, path)?;
        }
        record.write(&reports)
    }
}

fn exhausted(problems: Vec<String>) -> Result<(), CliError> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Exhausted(problems.join("; ")))
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<String>, CliError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .flatten()
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    Ok(names)
}

/// Order-preserving map over at most `jobs` scoped threads.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let chunk = items.len().div_ceil(jobs.max(1)).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

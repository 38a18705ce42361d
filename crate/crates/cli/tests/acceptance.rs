//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.
//!
//! Library-level checks are shared with the core test suite; pipeline-level
//! checks drive the `persona` binary on synthetic panels.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use persona_core::sampling::{allocation_accuracy, AllocationPlan, MIN_STRATUM_SIZE};

#[allow(dead_code)]
#[path = "../../core/tests/engine_contract.rs"]
mod engine_contract;
#[allow(dead_code)]
#[path = "../../core/tests/metric_oracles.rs"]
mod metric_oracles;
#[allow(dead_code)]
#[path = "../../core/tests/retrieval_oracles.rs"]
mod retrieval_oracles;

type Check = Result<String, String>;
type Criterion<'a> = (&'a str, Box<dyn FnOnce() -> Check + 'a>);

/// Runs `f`, turning a panic into a failure message.
fn guarded(f: impl FnOnce() -> Check) -> Check {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => Err(payload
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

/// Runs named library checks in order; the first panic fails the criterion.
fn all_of(checks: &[(&str, fn())]) -> Check {
    for (name, f) in checks {
        guarded(|| {
            f();
            Ok(String::new())
        })
        .map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} checks", checks.len()))
}

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

// ---------------------------------------------------------------------------
// 1. Stratified allocation against a reference Core-study allocation table.

/// (age group, gender, household, available, reference allocation).
const CORE_TABLE: [(&str, &str, &str, usize, usize); 26] = [
    ("18-34", "F", "couple", 159, 14),
    ("18-34", "F", "family", 338, 29),
    ("18-34", "F", "single", 146, 13),
    ("18-34", "M", "couple", 98, 9),
    ("18-34", "M", "family", 245, 21),
    ("18-34", "M", "single", 104, 9),
    ("18-34", "Other", "other", 5, 0),
    ("35-49", "F", "couple", 88, 8),
    ("35-49", "F", "family", 419, 37),
    ("35-49", "F", "single", 128, 11),
    ("35-49", "M", "couple", 104, 9),
    ("35-49", "M", "family", 298, 26),
    ("35-49", "M", "single", 113, 10),
    ("50-64", "F", "couple", 362, 32),
    ("50-64", "F", "family", 327, 28),
    ("50-64", "F", "single", 169, 15),
    ("50-64", "M", "couple", 294, 26),
    ("50-64", "M", "family", 297, 26),
    ("50-64", "M", "single", 174, 15),
    ("50-64", "Other", "other", 1, 0),
    ("65+", "F", "couple", 495, 43),
    ("65+", "F", "family", 36, 3),
    ("65+", "F", "single", 375, 33),
    ("65+", "M", "couple", 642, 56),
    ("65+", "M", "family", 56, 5),
    ("65+", "M", "single", 254, 22),
];

fn allocation_table() -> Check {
    let started = Instant::now();
    let key = |r: &(&str, &str, &str, usize, usize)| format!("{}/{}/{}", r.0, r.1, r.2);
    let available: BTreeMap<String, usize> = CORE_TABLE.iter().map(|r| (key(r), r.3)).collect();
    let reference: BTreeMap<String, usize> = CORE_TABLE.iter().map(|r| (key(r), r.4)).collect();

    let plan = AllocationPlan::for_population(&available, 500, MIN_STRATUM_SIZE).map_err(|e| e.to_string())?;
    let allocated = plan.allocated();
    let included: BTreeMap<String, usize> = plan
        .rows
        .iter()
        .filter(|r| r.allocated.is_some())
        .map(|r| (r.stratum.clone(), r.available))
        .collect();
    let sampled: BTreeMap<String, usize> = included.keys().map(|k| (k.clone(), allocated[k])).collect();
    let accuracy = allocation_accuracy(&sampled, &included, 500).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();

    let total: usize = allocated.values().sum();
    let worst = reference.iter().map(|(k, &p)| allocated[k].abs_diff(p)).max().unwrap_or(0);
    let summary = format!(
        "{} strata kept ({} respondents), total {total}, max cell diff {worst}, MAD {:.4}, MaxD {:.4}, {:.3}s",
        included.len(),
        included.values().sum::<usize>(),
        accuracy.mad,
        accuracy.max_d,
        elapsed
    );
    let mut failures = Vec::new();
    if total != 500 {
        failures.push("total != 500".to_string());
    }
    if worst > 1 {
        failures.push(format!("cell differs by {worst}"));
    }
    if (accuracy.mad - 0.2602).abs() > 0.005 {
        failures.push(format!("MAD {:.4} not within 0.005 of 0.2602", accuracy.mad));
    }
    if (accuracy.max_d - 0.5275).abs() > 0.005 {
        failures.push(format!("MaxD {:.4} not within 0.005 of 0.5275", accuracy.max_d));
    }
    if elapsed >= 1.0 {
        failures.push("slower than 1 s".into());
    }
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// Pipeline helpers.

fn persona(out: &Path, manifest: &Path, args: &[&str]) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_persona"))
        .arg("--manifest")
        .arg(manifest)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .map_err(|e| format!("cannot run persona: {e}"))?;
    if output.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`persona {}` exited with {:?}: {}",
            args.join(" "),
            output.status.code(),
            String::from_utf8_lossy(&output.stderr).trim()
        ))
    }
}

fn write_manifest(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).expect("write manifest");
    path
}

fn read_rows(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            Ok(headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        })
        .collect()
}

fn number(row: &BTreeMap<String, String>, column: &str) -> Result<f64, String> {
    row.get(column)
        .ok_or_else(|| format!("missing column {column}"))?
        .parse()
        .map_err(|e| format!("{column}: {e}"))
}

fn files_under(root: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// 3. Oracle chain.

const ORACLE_MANIFEST: &str = "sample_size = 50\n\n[synth]\nrespondents = 200\n";

fn oracle_chain() -> Check {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_manifest(tmp.path(), ORACLE_MANIFEST);
    let out = tmp.path().join("out");
    for stage in ["synth", "sample", "profile", "predict", "evaluate"] {
        persona(&out, &manifest, &[stage])?;
    }
    let rows = read_rows(&out.join("reports/core_prediction/metrics.csv"))?;
    let mut checked = 0;
    for row in rows.iter().filter(|r| r["slice"] == "all") {
        let value = number(row, "value")?;
        let (want, tol) = match row["dimension"].as_str() {
            "question_f1" | "respondent_match" | "clustering_ari" => (1.0, 0.0),
            "question_jsd" => (0.0, 1e-12),
            "respondent_mmd" => (0.0, 1e-9),
            "equity_dpi" => (0.0, 0.0),
            other => return Err(format!("unexpected dimension {other}")),
        };
        ensure((value - want).abs() <= tol, || format!("{} {} = {value}, want {want}", row["setting"], row["dimension"]))?;
        checked += 1;
    }
    ensure(checked == 24, || format!("expected 4 settings x 6 metrics, found {checked}"))?;
    let elapsed = started.elapsed().as_secs_f64();
    ensure(elapsed < 30.0, || format!("took {elapsed:.1}s"))?;
    Ok(format!("4 settings x 6 metrics exact, {elapsed:.1}s"))
}

// ---------------------------------------------------------------------------
// 7-9. Noisy-oracle personas against a uniform baseline.

const MIXED_MANIFEST: &str = "\
sample_size = 60

[synth]
respondents = 240

[evaluation]
resamples = 30

[backends]
noisy_accuracy = 0.6
";

/// Full pipeline: personas from the noisy oracle, baseline from the
/// uniform mock, then evaluation and reports.
fn mixed_pipeline(out: &Path, manifest: &Path, jobs: &str) -> Result<(), String> {
    let j = ["--jobs", jobs];
    for stage in ["synth", "sample", "profile"] {
        persona(out, manifest, &[&j[..], &[stage]].concat())?;
    }
    persona(out, manifest, &[&j[..], &["--backend", "noisy", "predict"]].concat())?;
    persona(out, manifest, &[&j[..], &["--backend", "uniform", "baseline"]].concat())?;
    persona(out, manifest, &[&j[..], &["evaluate"]].concat())?;
    persona(out, manifest, &[&j[..], &["report"]].concat())
}

struct Mixed {
    _tmp: tempfile::TempDir,
    runs: Vec<PathBuf>,
}

fn run_mixed() -> Result<Mixed, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_manifest(tmp.path(), MIXED_MANIFEST);
    let runs = vec![tmp.path().join("jobs1"), tmp.path().join("jobs8")];
    mixed_pipeline(&runs[0], &manifest, "1")?;
    mixed_pipeline(&runs[1], &manifest, "8")?;
    Ok(Mixed { _tmp: tmp, runs })
}

fn determinism(mixed: &Result<Mixed, String>) -> Check {
    let mixed = mixed.as_ref().map_err(Clone::clone)?;
    let (a, b) = (&mixed.runs[0], &mixed.runs[1]);
    let (fa, fb) = (files_under(a), files_under(b));
    ensure(fa == fb, || {
        let diff: Vec<_> = fa.symmetric_difference(&fb).take(5).collect();
        format!("file sets differ: {diff:?}")
    })?;
    let mut compared = 0;
    for rel in &fa {
        let (x, y) = (std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap());
        ensure(x == y, || format!("{} differs between --jobs 1 and --jobs 8", rel.display()))?;
        compared += 1;
    }
    let must = ["predictions.csv", "metrics.csv", "table_settings.csv", "fig3_heatmap.csv"];
    for name in must {
        ensure(fa.iter().any(|p| p.ends_with(name)), || format!("no {name} produced"))?;
    }
    Ok(format!("{compared} files byte-identical across --jobs 1 / 8"))
}

fn baseline_contract(mixed: &Result<Mixed, String>) -> Check {
    all_of(&[("uniform_baseline_is_close_to_uniform", engine_contract::uniform_baseline_is_close_to_uniform)])?;
    let mixed = mixed.as_ref().map_err(Clone::clone)?;
    let runs = mixed.runs[0].join("runs/core_prediction");
    let keys = |path: PathBuf| -> Result<BTreeSet<(String, String)>, String> {
        Ok(read_rows(&path)?.into_iter().map(|r| (r["dimension"].clone(), r["slice"].clone())).collect())
    };
    let baseline = keys(runs.join("baseline/mock-uniform/metrics.csv"))?;
    let persona = keys(runs.join("background_only/mock-noisy-oracle/metrics.csv"))?;
    ensure(baseline == persona, || "baseline and persona metric tables differ in shape".into())?;
    ensure(baseline.len() >= 6, || "metric table too small".into())?;
    Ok(format!("TV <= 0.06 over 500 repeats; baseline scored on the same {} metric rows", baseline.len()))
}

const REPORT_HEADERS: [(&str, &str); 6] = [
    ("fig2_domain_distances.csv", "task,setting,domain,questions,jsd,mmd"),
    ("fig3_heatmap.csv", "task,setting,variability_bin,rarity_bin,f1,questions,flagged"),
    ("fig5_strata.csv", "task,setting,axis,group,respondents,match_rate,question_f1,parity_index"),
    ("radar_inputs.csv", "task,setting,dimension,value,scaled"),
    ("table_settings.csv", "task,setting,question_f1,question_f1_se,respondent_match,respondent_match_se,question_jsd,question_jsd_se,respondent_mmd,respondent_mmd_se,clustering_ari,clustering_ari_se,equity_dpi,equity_dpi_se"),
    ("metrics.csv", "task,setting,dimension,slice,value,se,resamples"),
];

fn report_schema_and_direction(mixed: &Result<Mixed, String>) -> Check {
    let mixed = mixed.as_ref().map_err(Clone::clone)?;
    let reports = mixed.runs[0].join("reports/core_prediction");
    for (file, header) in REPORT_HEADERS {
        let text = std::fs::read_to_string(reports.join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure(text.lines().next() == Some(header), || format!("{file} header is {:?}", text.lines().next()))?;
    }

    let table = read_rows(&reports.join("table_settings.csv"))?;
    let jsd = |setting: &str| -> Result<f64, String> {
        let row = table.iter().find(|r| r["setting"] == setting).ok_or(format!("no row for {setting}"))?;
        number(row, "question_jsd")
    };
    let baseline = jsd("baseline@mock-uniform")?;
    let personas = ["background_only", "profile", "profile_lexical_topk", "profile_semantic_topk"];
    let mut worst: f64 = 0.0;
    for p in personas {
        let label = format!("{p}@mock-noisy-oracle");
        let value = jsd(&label)?;
        ensure(value < baseline, || format!("{label} JSD {value:.4} not below baseline {baseline:.4}"))?;
        ensure(reports.join(format!("fig3_heatmap_{label}.svg")).exists(), || format!("no heatmap figure for {label}"))?;
        worst = worst.max(value);
    }

    let heatmap = read_rows(&reports.join("fig3_heatmap.csv"))?;
    let cell = |setting: &str, v: &str, r: &str| -> Result<f64, String> {
        let row = heatmap
            .iter()
            .find(|row| row["setting"] == setting && row["variability_bin"] == v && row["rarity_bin"] == r)
            .ok_or(format!("no heatmap cell {v}/{r} for {setting}"))?;
        ensure(row["flagged"] == "false", || format!("{setting} {v}/{r} is empty"))?;
        number(row, "f1")
    };
    let mut margins = Vec::new();
    for p in personas {
        let label = format!("{p}@mock-noisy-oracle");
        let (easy, hard) = (cell(&label, "Low", "Common")?, cell(&label, "Very high", "Rare")?);
        ensure(easy >= hard, || format!("{label}: Low/Common {easy:.3} < Very high/Rare {hard:.3}"))?;
        margins.push(easy - hard);
    }
    Ok(format!(
        "schemas match; persona JSD <= {worst:.4} < baseline {baseline:.4}; min heatmap margin {:.3}",
        margins.iter().copied().fold(f64::INFINITY, f64::min)
    ))
}

fn main() {
    // Failures are reported on the criterion line, not as panic backtraces.
    std::panic::set_hook(Box::new(|_| {}));

    let mixed = run_mixed();

    let criteria: Vec<Criterion<'_>> = vec![
        ("stratified allocation reproduces the Core table", Box::new(allocation_table)),
        (
            "batching equation holds over [1,200]x[1,40]",
            Box::new(|| {
                all_of(&[
                    ("batching_equation_holds_exhaustively", engine_contract::batching_equation_holds_exhaustively),
                    ("batching_groups_by_study", engine_contract::batching_groups_by_study),
                ])
            }),
        ),
        ("oracle chain scores perfectly end to end", Box::new(oracle_chain)),
        (
            "metrics match brute-force oracles",
            Box::new(|| {
                all_of(&[
                    ("weighted_f1", metric_oracles::weighted_f1_matches_brute_force),
                    ("jsd", metric_oracles::jsd_matches_brute_force),
                    ("mmd", metric_oracles::mmd_matches_brute_force),
                    ("ari", metric_oracles::ari_matches_brute_force),
                    ("ari_independent", metric_oracles::ari_of_independent_partitions_is_near_zero),
                ])
            }),
        ),
        (
            "validation stages, retry caps and missing predictions",
            Box::new(|| {
                all_of(&[
                    ("crafted_suite", engine_contract::crafted_suite_hits_each_stage_exactly_once),
                    ("coverage", engine_contract::coverage_rejects_additions_and_duplicates),
                    ("prediction_retries", engine_contract::success_after_three_failures_uses_four_attempts),
                    ("exhaustion", engine_contract::exhausted_subbatch_becomes_missing_and_scores_as_wrong),
                    ("profile_retries", engine_contract::profile_generation_caps_at_three_attempts),
                    ("profile_cache", engine_contract::concurrent_profile_requests_make_one_call),
                ])
            }),
        ),
        (
            "retrieval top-K matches exhaustive oracles",
            Box::new(|| {
                all_of(&[
                    ("lexical", retrieval_oracles::lexical_topk_matches_exhaustive_oracle),
                    ("semantic", retrieval_oracles::semantic_topk_matches_exhaustive_oracle),
                ])
            }),
        ),
        ("pipeline is deterministic across --jobs", Box::new(|| determinism(&mixed))),
        ("baseline contract", Box::new(|| baseline_contract(&mixed))),
        ("report schemas and directional sanity", Box::new(|| report_schema_and_direction(&mixed))),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        match guarded(check) {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
}

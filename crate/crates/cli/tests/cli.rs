//! Exit codes and stage bookkeeping of the `persona` binary.

use std::path::Path;
use std::process::{Command, Output};

const MANIFEST: &str = "sample_size = 30\n\n[synth]\nrespondents = 120\n\n[evaluation]\nresamples = 5\n";

fn persona(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persona"))
        .arg("--manifest")
        .arg(dir.join("manifest.toml"))
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .expect("run persona")
}

fn setup(manifest: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.toml"), manifest).unwrap();
    dir
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn stages_run_in_order_and_rerun_idempotently() {
    let dir = setup(MANIFEST);
    for stage in ["synth", "sample"] {
        assert_eq!(code(&persona(dir.path(), &[stage])), 0, "{stage}");
    }
    let out = persona(dir.path(), &["predict", "--architecture", "background_only"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let predictions = dir.path().join("out/runs/core_prediction/background_only/mock-oracle/predictions.csv");
    let first = std::fs::read(&predictions).unwrap();
    assert_eq!(code(&persona(dir.path(), &["predict", "--architecture", "background_only"])), 0);
    assert_eq!(std::fs::read(&predictions).unwrap(), first);
    assert_eq!(code(&persona(dir.path(), &["evaluate"])), 0);
    assert_eq!(code(&persona(dir.path(), &["report", "--no-svg"])), 0);
    assert!(dir.path().join("out/reports/core_prediction/table_settings.csv").exists());
    assert!(!dir.path().join("out/.persona.lock").exists(), "lock released");
}

#[test]
fn missing_upstream_stage_is_stale_input() {
    let dir = setup(MANIFEST);
    let out = persona(dir.path(), &["sample"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    assert_eq!(code(&persona(dir.path(), &["synth"])), 0);
    assert_eq!(code(&persona(dir.path(), &["sample"])), 0);
    let out = persona(dir.path(), &["evaluate"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn tampered_input_is_detected() {
    let dir = setup(MANIFEST);
    assert_eq!(code(&persona(dir.path(), &["synth"])), 0);
    assert_eq!(code(&persona(dir.path(), &["sample"])), 0);

    let answers = dir.path().join("out/panel/answers.csv");
    let mut bytes = std::fs::read(&answers).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'1' { b'2' } else { b'1' };
    std::fs::write(&answers, bytes).unwrap();

    let out = persona(dir.path(), &["predict", "--architecture", "background_only"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("answers.csv"), "{}", stderr(&out));
}

#[test]
fn manifest_changes_invalidate_downstream_stages() {
    let dir = setup(MANIFEST);
    assert_eq!(code(&persona(dir.path(), &["synth"])), 0);
    assert_eq!(code(&persona(dir.path(), &["sample"])), 0);
    let out = persona(dir.path(), &["--seed", "sampling=9", "predict", "--architecture", "background_only"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn invalid_manifests_are_validation_errors() {
    for bad in ["batch_size = 0\n", "foo = 1\n", "sample_size = \"many\"\n"] {
        let dir = setup(bad);
        let out = persona(dir.path(), &["synth"]);
        assert_eq!(code(&out), 2, "{bad}: {}", stderr(&out));
    }
    let dir = setup("sample_size = \"many\"\n");
    assert!(stderr(&persona(dir.path(), &["synth"])).contains("sample_size"));
}

#[test]
fn held_lock_refuses_a_second_invocation() {
    let dir = setup(MANIFEST);
    std::fs::create_dir_all(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("out/.persona.lock"), "12345").unwrap();
    let out = persona(dir.path(), &["synth"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!dir.path().join("out/panel").exists());
}

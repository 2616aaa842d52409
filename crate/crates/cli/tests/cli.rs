//! Exit codes, validation before writes, config layering and manifest replay.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lowmt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowmt"))
        .args(["-q", "--registry", "registry"])
        .args(args)
        .current_dir(dir)
        .env_remove("LOWMT_REGISTRY")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn toy(dir: &Path) {
    let out = lowmt(dir, &["generate-toy", "--pairs", "60", "--mono", "40", "--run-dir", "toy"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_input_is_a_config_error_without_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lowmt(dir.path(), &["clean", "--input", "nope.txt", "--run-dir", "run"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.txt"));
    assert!(!dir.path().join("run").exists());
    let out = lowmt(dir.path(), &["split", "--run-dir", "run"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("input"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let out = lowmt(dir.path(), &["split", "--input", "toy/real.jsonl", "--sizes", "40,10,10", "--set", "sead=3", "--run-dir", "run"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sead"), "{}", stderr(&out));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn impossible_split_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let out = lowmt(dir.path(), &["split", "--input", "toy/real.jsonl", "--sizes", "50,10,10", "--run-dir", "run"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn failing_backend_is_a_runtime_error_with_failed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let out = lowmt(dir.path(), &["register", "--key", "opus/ft/yue-en", "--engine", "command:false", "--run-dir", "reg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = lowmt(dir.path(), &["evaluate", "--model", "opus/ft/yue-en", "--test", "toy/real.jsonl", "--run-dir", "eval"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let manifest = read_json(&dir.path().join("eval/manifest.json"));
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].is_string());
}

#[test]
fn config_file_sections_and_set_layering() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    std::fs::write(
        dir.path().join("lowmt.toml"),
        "[split]\ninput = \"toy/real.jsonl\"\nsizes = [30, 10, 10]\nseed = 9\n",
    )
    .unwrap();
    let out = lowmt(dir.path(), &["--config", "lowmt.toml", "split", "--sizes", "40,10,10", "--set", "seed=4", "--run-dir", "run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = read_json(&dir.path().join("run/manifest.json"));
    assert_eq!(manifest["config"]["sizes"], serde_json::json!([40, 10, 10]));
    assert_eq!(manifest["config"]["seed"], 4);
    assert_eq!(manifest["config"]["input"], "toy/real.jsonl");
    std::fs::write(dir.path().join("bad.toml"), "[splitt]\nseed = 1\n").unwrap();
    let out = lowmt(dir.path(), &["--config", "bad.toml", "split"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let out = lowmt(dir.path(), &["split", "--input", "toy/real.jsonl", "--sizes", "40,10,10", "--seed", "5", "--run-dir", "first"]);
    assert_eq!(code(&out), 0);
    let out = lowmt(dir.path(), &["--config", "first/manifest.json", "split", "--run-dir", "second"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = read_json(&dir.path().join("first/manifest.json"));
    let second = read_json(&dir.path().join("second/manifest.json"));
    assert_eq!(first["config"], second["config"]);
    let hashes = |m: &Value| -> Vec<String> { m["outputs"].as_array().unwrap().iter().map(|o| o["sha256"].as_str().unwrap().to_string()).collect() };
    assert_eq!(hashes(&first), hashes(&second));
    assert_eq!(first["inputs"][0]["sha256"], second["inputs"][0]["sha256"]);
    assert_eq!(hashes(&first).len(), 6, "three corpora plus sidecars");
}

#[test]
fn backtranslate_resumes_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let out = lowmt(dir.path(), &["clean", "--input", "toy/mono_raw.txt", "--run-dir", "clean"]);
    assert_eq!(code(&out), 0);
    // Fails on the third call: the first two batches are checkpointed.
    let script = dir.path().join("flaky.sh");
    std::fs::write(
        &script,
        "n=$(cat count 2>/dev/null || echo 0); n=$((n+1)); echo $n > count\n\
         if [ \"$n\" = 3 ]; then echo boom >&2; exit 1; fi\n\
         while IFS= read -r line; do id=$(printf '%s' \"$line\" | sed 's/.*\"id\":\\([0-9]*\\).*/\\1/'); \
         printf '{\"schema_version\":1,\"id\":%s,\"translation\":\"t\"}\\n' \"$id\"; done\n",
    )
    .unwrap();
    let engine = format!("command:sh {}", script.display());
    let out = lowmt(dir.path(), &["register", "--key", "opus/ft/yue-en", "--engine", &engine, "--run-dir", "reg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let args = ["backtranslate", "--input", "clean/clean.jsonl", "--model", "opus/ft/yue-en", "--batch-size", "8", "--run-dir", "bt"];
    let out = lowmt(dir.path(), &args);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(dir.path().join("bt/synthetic.partial.jsonl").exists());
    let out = lowmt(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(!dir.path().join("bt/synthetic.partial.jsonl").exists());
    let bt = std::fs::read_to_string(dir.path().join("bt/synthetic.jsonl")).unwrap();
    assert_eq!(bt.lines().count(), 40);
}

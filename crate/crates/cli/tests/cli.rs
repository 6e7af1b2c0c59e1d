use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn validus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_validus")).args(args).env_remove("VALIDUS_BUDGET").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios")
}

#[test]
fn classify_reports_verdicts() {
    let o = validus(&["classify", "--builtin", "strong", "--n", "4", "--t", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("verdict: solvable_universal"));
    assert!(stdout(&o).contains("31,2:1 3:1 4:1,1"));

    let o = validus(&["classify", "--builtin", "weak", "--n", "3", "--t", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("verdict: unsolvable"));

    let o = validus(&["classify", "--builtin", "constant:0", "--n", "4", "--t", "1"]);
    assert!(stdout(&o).contains("verdict: solvable_trivial"));
    assert!(stdout(&o).contains("trivial witness: 0"));
}

#[test]
fn lambda_csv_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lambda.csv");
    let o = validus(&["classify", "--builtin", "strong", "--n", "4", "--t", "1", "--lambda-out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let shipped = std::fs::read_to_string(scenarios().join("universal_strong_n4.lambda.csv")).unwrap();
    assert_eq!(std::fs::read_to_string(out).unwrap(), shipped);
}

#[test]
fn malformed_property_file_names_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"kind\": \"table\",\n  \"table\": [1, }").unwrap();
    let o = validus(&["classify", "--property-file", path.to_str().unwrap(), "--n", "4", "--t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn budget_overflow_exits_with_two() {
    let o = Command::new(env!("CARGO_BIN_EXE_validus"))
        .args(["classify", "--builtin", "strong", "--n", "4", "--t", "1"])
        .env("VALIDUS_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
}

#[test]
fn run_then_check_a_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("run.jsonl");
    let file = scenarios().join("universal_strong_n4.json");
    let o = validus(&["run", file.to_str().unwrap(), "--out", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("result: PASS"));
    let metrics = std::fs::read_to_string(dir.path().join("run.metrics.csv")).unwrap();
    assert!(metrics.lines().any(|l| l.starts_with("4,1,universal:auth,silent,7,")), "{metrics}");

    let o = validus(&["check", trace.to_str().unwrap(), "--base", scenarios().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("result: PASS"));
}

#[test]
fn run_flags_override_the_file() {
    let file = scenarios().join("auth_silent_n4.json");
    let o = validus(&["run", file.to_str().unwrap(), "--protocol", "nonauth", "--seed", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("(nonauth, n = 4"));
}

#[test]
fn bench_flags_ratios_outside_the_band() {
    let o = validus(&["bench", "--protocol", "auth", "--ns", "4,8", "--seeds", "0", "--min-ratio", "2.5"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("ratio msgs(n=8)/msgs(n=4) = 2.923"));
    assert!(stdout(&o).starts_with("#validus-bench v1\n"));

    let o = validus(&["bench", "--protocol", "auth", "--ns", "4,8", "--seeds", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FLAGGED"));
}

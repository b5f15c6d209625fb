//! End-to-end tests of the `onbab` binary: exit codes, determinism, and
//! tamper detection on saved reports.

use std::path::Path;
use std::process::{Command, Output};

fn onbab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onbab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = onbab(
            dir.path(),
            &[
                "gen",
                "--kind",
                "euclidean",
                "--n",
                "10",
                "--seed",
                "7",
                "-o",
                name,
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gen_rejects_bad_params() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&onbab(dir.path(), &["gen", "--n", "0"])), 2);
}

#[test]
fn run_check_roundtrip_passes() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "10", "--seed", "1", "-o", "a.json"],
    );
    for alg in ["last", "bab", "obl-rand", "obl-det", "obl-det2"] {
        let out = onbab(
            dir.path(),
            &[
                "run",
                "--alg",
                alg,
                "--instance",
                "a.json",
                "--seed",
                "3",
                "-o",
                "r.json",
            ],
        );
        assert_eq!(
            code(&out),
            0,
            "{alg}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let out = onbab(
            dir.path(),
            &["check", "--instance", "a.json", "--report", "r.json"],
        );
        let text = String::from_utf8_lossy(&out.stdout);
        assert_eq!(code(&out), 0, "{alg}: {text}");
        assert!(text.contains("PASS"), "{alg}: {text}");
        assert!(!text.contains("FAIL"), "{alg}: {text}");
    }
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "12", "--seed", "2", "-o", "a.json"],
    );
    for name in ["r1.json", "r2.json"] {
        let out = onbab(
            dir.path(),
            &[
                "run",
                "--alg",
                "obl-rand",
                "--instance",
                "a.json",
                "--seed",
                "9",
                "-o",
                name,
            ],
        );
        assert_eq!(code(&out), 0);
    }
    let a = std::fs::read(dir.path().join("r1.json")).unwrap();
    let b = std::fs::read(dir.path().join("r2.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tampered_report_fails_check_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "8", "--seed", "4", "-o", "a.json"],
    );
    onbab(
        dir.path(),
        &[
            "run",
            "--alg",
            "last",
            "--instance",
            "a.json",
            "-o",
            "r.json",
        ],
    );
    let mut report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let edges = report["summary"]["edges"]["h"]
        .as_array_mut()
        .expect("edge list in summary");
    edges.pop();
    std::fs::write(dir.path().join("r.json"), report.to_string()).unwrap();
    let out = onbab(
        dir.path(),
        &["check", "--instance", "a.json", "--report", "r.json"],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn check_subset_by_name() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "8", "--seed", "4", "-o", "a.json"],
    );
    onbab(
        dir.path(),
        &[
            "run",
            "--alg",
            "last",
            "--instance",
            "a.json",
            "-o",
            "r.json",
        ],
    );
    let out = onbab(
        dir.path(),
        &[
            "check",
            "--instance",
            "a.json",
            "--report",
            "r.json",
            "--check",
            "stretch≤7",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("stretch≤7"));
    assert!(!text.contains("reproducible"));
}

#[test]
fn unknown_algorithm_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    onbab(dir.path(), &["gen", "--n", "6", "-o", "a.json"]);
    let out = onbab(
        dir.path(),
        &["run", "--alg", "nope", "--instance", "a.json"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn role_mismatch_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &[
            "gen",
            "--n",
            "8",
            "--profile",
            "pairs",
            "--seed",
            "1",
            "-o",
            "p.json",
        ],
    );
    let out = onbab(
        dir.path(),
        &["run", "--alg", "mlast", "--instance", "p.json"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn compare_emits_csv_with_ratios() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "5", "--seed", "6", "-o", "a.json"],
    );
    let out = onbab(dir.path(), &["compare", "--instance", "a.json"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("algorithm,alg_cost,baseline,baseline_cost,ratio"));
    assert!(text.lines().count() >= 3, "{text}");
}

#[test]
fn compare_too_large_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "30", "--seed", "6", "-o", "a.json"],
    );
    let out = onbab(dir.path(), &["compare", "--instance", "a.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}

#[test]
fn oracle_values_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "5", "--seed", "8", "-o", "a.json"],
    );
    let value = |which: &str| -> f64 {
        let out = onbab(
            dir.path(),
            &["oracle", "--instance", "a.json", "--which", which],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("oracle prints JSON");
        v["value"].as_f64().unwrap()
    };
    let mst = value("mst");
    let steiner = value("steiner");
    let greedy = value("greedy-steiner");
    assert!(steiner <= mst + 1e-9);
    assert!(greedy + 1e-9 >= steiner);
}

#[test]
fn run_replicas_emit_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    onbab(
        dir.path(),
        &["gen", "--n", "8", "--seed", "2", "-o", "a.json"],
    );
    let out = onbab(
        dir.path(),
        &[
            "run",
            "--alg",
            "obl-rand",
            "--instance",
            "a.json",
            "--seed",
            "1",
            "--replicas",
            "4",
            "--jobs",
            "2",
            "-o",
            "rs.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("rs.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for (i, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config"]["seed"].as_u64().unwrap(), 1 + i as u64);
    }
}

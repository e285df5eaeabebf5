//! End-to-end runs of the `hardlabel` binary: subcommand plumbing, exit
//! codes, and the external oracle protocol.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hardlabel")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("HARDLABEL_REPORT_DIR")
        .output()
        .expect("binary runs")
}

fn write_linear_dataset(path: &Path) {
    let csv = "0,0.1,0.0\n0,0.2,0.1\n1,0.9,0.0\n1,0.8,0.3\n1,1.0,-0.2\n0,0.05,-0.1\n";
    std::fs::write(path, csv).unwrap();
}

#[test]
fn gen_model_attack_verify_ground_truth_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = run(
        &[
            "gen-model",
            "--kind",
            "linear",
            "--d",
            "2",
            "--out",
            "model.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    write_linear_dataset(&d.join("data.csv"));

    let out = run(
        &[
            "attack",
            "--model",
            "model.json",
            "--dataset",
            "data.csv",
            "--n",
            "3",
            "--budget",
            "4000",
            "--seed",
            "7",
            "--out",
            "run",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("summary:"), "missing summary in {stdout}");
    assert!(d.join("run/records.jsonl").exists());
    assert!(d.join("run/summary.json").exists());

    let out = run(
        &[
            "verify",
            "--report",
            "run",
            "--model",
            "model.json",
            "--dataset",
            "data.csv",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));

    let out = run(
        &[
            "ground-truth",
            "--model",
            "model.json",
            "--dataset",
            "data.csv",
            "--n",
            "3",
            "--seed",
            "7",
            "--out",
            "gt",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(d.join("gt/records.jsonl").exists());
}

#[test]
fn missing_model_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_linear_dataset(&dir.path().join("data.csv"));
    let out = run(
        &["attack", "--model", "nope.json", "--dataset", "data.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn bad_mode_string_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "attack",
            "--model",
            "m.json",
            "--dataset",
            "d.csv",
            "--mode",
            "sideways",
        ],
        dir.path(),
    );
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn env_var_overrides_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(
        &[
            "gen-model",
            "--kind",
            "linear",
            "--d",
            "2",
            "--out",
            "model.json",
        ],
        d,
    );
    write_linear_dataset(&d.join("data.csv"));
    let out = Command::new(bin())
        .args([
            "attack",
            "--model",
            "model.json",
            "--dataset",
            "data.csv",
            "--n",
            "1",
            "--budget",
            "2000",
            "--out",
            "ignored",
        ])
        .current_dir(d)
        .env("HARDLABEL_REPORT_DIR", d.join("from-env"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(d.join("from-env/records.jsonl").exists());
    assert!(!d.join("ignored").exists());
}

#[test]
fn external_oracle_protocol_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(
        &[
            "gen-model",
            "--kind",
            "radial",
            "--d",
            "2",
            "--out",
            "radial.json",
        ],
        d,
    );
    let external = format!(
        r#"{{"type": "external", "cmd": {:?}, "args": ["serve", "--model", {:?}]}}"#,
        bin(),
        d.join("radial.json").to_str().unwrap(),
    );
    std::fs::write(d.join("external.json"), external).unwrap();
    std::fs::write(
        d.join("data.csv"),
        "0,0.0,0.0\n0,0.1,0.1\n1,0.9,0.0\n1,0.0,0.8\n",
    )
    .unwrap();

    let out = run(
        &[
            "attack",
            "--model",
            "external.json",
            "--dataset",
            "data.csv",
            "--n",
            "2",
            "--budget",
            "3000",
            "--seed",
            "3",
            "--out",
            "run",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // The child process saw exactly the same decision function, so the
    // in-process radial model must re-verify every record.
    let out = run(
        &[
            "verify",
            "--report",
            "run",
            "--model",
            "radial.json",
            "--dataset",
            "data.csv",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
}

#[test]
fn gbdt_fixture_attack_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(
        &[
            "gen-model",
            "--kind",
            "gbdt",
            "--d",
            "2",
            "--out",
            "stumps.json",
        ],
        d,
    );
    std::fs::write(d.join("data.csv"), "0,0.5,0.5\n1,0.95,0.7\n1,0.7,0.95\n").unwrap();
    let out = run(
        &[
            "attack",
            "--model",
            "stumps.json",
            "--dataset",
            "data.csv",
            "--n",
            "3",
            "--budget",
            "30000",
            "--seed",
            "1",
            "--out",
            "run",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // Per-example optima: the class-0 point must reach the corner of the
    // adversarial quadrant (√0.02); each class-1 point needs only to slide
    // one coordinate below its 0.6 stump (0.1).
    let expected = [(0.02f64).sqrt(), 0.1, 0.1];
    let records = std::fs::read_to_string(d.join("run/records.jsonl")).unwrap();
    let mut checked = 0;
    for line in records.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        let index = record["index"].as_u64().unwrap() as usize;
        let distortion = record["distortion"].as_f64().unwrap();
        let want = expected[index];
        assert!(
            (distortion - want).abs() / want <= 0.1,
            "example {index}: distortion {distortion} not within 10% of {want}"
        );
        checked += 1;
    }
    assert_eq!(checked, 3);
}

//! Batch runs: determinism of report files, resume behavior, and summary
//! round-trips.

use std::path::Path;

use hardlabel::harness::{
    load_records, load_summary, report_paths, run_experiment, summarize, AttackMode,
    ExperimentConfig, RecordStatus,
};
use hardlabel::oracle::ModelSpec;
use hardlabel::rgf::RgfConfig;

fn write_fixtures(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let model_path = dir.join("model.json");
    std::fs::write(
        &model_path,
        serde_json::to_string_pretty(&ModelSpec::linear_halfspace(2)).unwrap(),
    )
    .unwrap();
    let dataset_path = dir.join("data.csv");
    let mut csv = String::new();
    for i in 0..8 {
        csv.push_str(&format!(
            "0,{:.2},{:.2}\n",
            0.05 + 0.04 * i as f64,
            -0.2 + 0.05 * i as f64
        ));
        csv.push_str(&format!(
            "1,{:.2},{:.2}\n",
            0.8 + 0.03 * i as f64,
            0.3 - 0.07 * i as f64
        ));
    }
    std::fs::write(&dataset_path, csv).unwrap();
    (model_path, dataset_path)
}

fn config(model: &Path, dataset: &Path, out: &Path, workers: usize) -> ExperimentConfig {
    ExperimentConfig {
        mode: AttackMode::Untargeted,
        n_examples: 4,
        rgf: RgfConfig {
            query_budget: 3_000,
            ..RgfConfig::default()
        },
        seed: 42,
        report_dir: out.to_path_buf(),
        workers,
        skip_header: false,
        trace_cap: 50,
        ..ExperimentConfig::new(model, dataset)
    }
}

#[test]
fn record_files_are_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = write_fixtures(dir.path());

    let mut bytes = Vec::new();
    for (name, workers) in [("a", 1usize), ("b", 1), ("c", 4)] {
        let out = dir.path().join(name);
        run_experiment(&config(&model, &dataset, &out, workers)).unwrap();
        bytes.push(std::fs::read(report_paths(&out).0).unwrap());
    }
    assert_eq!(
        bytes[0], bytes[1],
        "identical reruns must match byte for byte"
    );
    assert_eq!(bytes[0], bytes[2], "worker count must not change records");
}

#[test]
fn summary_round_trips_through_the_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = write_fixtures(dir.path());
    let out = dir.path().join("run");
    let cfg = config(&model, &dataset, &out, 1);
    let output = run_experiment(&cfg).unwrap();

    let (records_path, summary_path) = report_paths(&out);
    let reloaded = load_records(&records_path).unwrap();
    assert_eq!(reloaded.len(), output.records.len());
    let recomputed = summarize(&reloaded, &cfg).unwrap();
    assert_eq!(recomputed, output.summary);
    assert_eq!(load_summary(&summary_path).unwrap(), output.summary);
    assert!(output.summary.avg_l2.is_some());
    assert_eq!(output.summary.success_rate, 1.0);
}

#[test]
fn linear_batch_reaches_the_analytic_average() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    std::fs::write(
        &model_path,
        serde_json::to_string(&ModelSpec::linear_halfspace(2)).unwrap(),
    )
    .unwrap();
    // Five origin-like points (margin 0.5 each) plus far-side candidates.
    let dataset_path = dir.path().join("data.csv");
    let mut csv = String::new();
    for i in 0..5 {
        csv.push_str(&format!("0,0.0,{:.2}\n", -0.2 + 0.1 * i as f64));
    }
    csv.push_str("1,1.0,0.0\n1,0.9,0.4\n1,1.1,-0.3\n");
    std::fs::write(&dataset_path, csv).unwrap();

    let out = dir.path().join("run");
    let cfg = ExperimentConfig {
        n_examples: 5,
        rgf: RgfConfig {
            query_budget: 5_000,
            ..RgfConfig::default()
        },
        seed: 3,
        report_dir: out,
        ..ExperimentConfig::new(&model_path, &dataset_path)
    };
    let output = run_experiment(&cfg).unwrap();
    let avg = output.summary.avg_l2.unwrap();
    assert!(
        (avg - 0.5).abs() <= 1e-2,
        "average distortion {avg} should sit at the margin 0.5"
    );
    assert_eq!(output.summary.success_rate, 1.0);
}

#[test]
fn starved_budget_reports_budget_exhaustion_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = write_fixtures(dir.path());
    let out = dir.path().join("run");
    let mut cfg = config(&model, &dataset, &out, 1);
    cfg.rgf.query_budget = 10;
    let output = run_experiment(&cfg).unwrap();
    assert!(output
        .records
        .iter()
        .all(|r| r.status == RecordStatus::BudgetExhausted));
    assert!(output.records.iter().all(|r| r.queries <= 10));
}

#[test]
fn resume_skips_completed_indices_and_rewrites_canonically() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = write_fixtures(dir.path());

    // Reference: one clean full run.
    let full_out = dir.path().join("full");
    run_experiment(&config(&model, &dataset, &full_out, 1)).unwrap();
    let reference = std::fs::read(report_paths(&full_out).0).unwrap();

    // Interrupted run: keep only some journal lines, then rerun.
    let resumed_out = dir.path().join("resumed");
    run_experiment(&config(&model, &dataset, &resumed_out, 1)).unwrap();
    let (records_path, _) = report_paths(&resumed_out);
    let text = std::fs::read_to_string(&records_path).unwrap();
    let partial: Vec<&str> = text.lines().take(2).collect();
    std::fs::write(&records_path, format!("{}\n", partial.join("\n"))).unwrap();

    let output = run_experiment(&config(&model, &dataset, &resumed_out, 1)).unwrap();
    assert_eq!(output.records.len(), 4);
    let resumed = std::fs::read(&records_path).unwrap();
    assert_eq!(
        resumed, reference,
        "resumed run must reconstruct the identical canonical file"
    );
}

#[test]
fn shortfall_aborts_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (model, dataset) = write_fixtures(dir.path());
    let out = dir.path().join("run");
    let mut cfg = config(&model, &dataset, &out, 1);
    cfg.n_examples = 1000;
    match run_experiment(&cfg) {
        Err(hardlabel::harness::HarnessError::Shortfall { needed, found }) => {
            assert_eq!(needed, 1000);
            assert_eq!(found, 16);
        }
        other => panic!("expected Shortfall, got {other:?}"),
    }
}

#[test]
fn targeted_next_batch_hits_assigned_targets() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("sectors.json");
    std::fs::write(
        &model_path,
        serde_json::to_string(&ModelSpec::three_sector()).unwrap(),
    )
    .unwrap();
    // Two points per sector, all correctly classified.
    let dataset_path = dir.path().join("data.csv");
    let csv = "0,1.0,0.0\n0,0.9,0.2\n1,-0.5,0.9\n1,-0.4,1.0\n2,-0.5,-0.9\n2,-0.3,-1.0\n";
    std::fs::write(&dataset_path, csv).unwrap();

    let out = dir.path().join("run");
    let cfg = ExperimentConfig {
        mode: AttackMode::TargetedNext,
        n_examples: 3,
        rgf: RgfConfig {
            query_budget: 8_000,
            ..RgfConfig::default()
        },
        seed: 11,
        report_dir: out,
        ..ExperimentConfig::new(&model_path, &dataset_path)
    };
    let output = run_experiment(&cfg).unwrap();
    let oracle = hardlabel::oracle::load_model(&model_path).unwrap();
    for record in &output.records {
        let expected = (record.original_label.0 + 1) % 3;
        assert_eq!(record.target_label.unwrap().0, expected);
        assert!(record.success, "example {} did not verify", record.index);
        let x_star = hardlabel::oracle::FeatureVector::new(record.x_star.clone().unwrap()).unwrap();
        assert_eq!(oracle.fork().classify(&x_star).unwrap().0, expected);
    }
}

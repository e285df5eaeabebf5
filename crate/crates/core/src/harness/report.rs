//! Report files: line-delimited per-example records plus one summary
//! document, both carrying an explicit schema version.
//!
//! Record files are rewritten in index order after every run, so a repeated
//! run with the same configuration produces byte-identical files regardless
//! of worker count or completion order. Wall-clock time is kept in memory
//! for console output but never serialized, since it would break that
//! guarantee.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::oracle::Label;

use super::{ExperimentConfig, HarnessError};

pub const SCHEMA_VERSION: u32 = 1;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Terminal state of one per-example attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Converged,
    BudgetExhausted,
    InitFailed,
    Error,
    /// Reference row produced by the ground-truth runner, not an attack.
    GroundTruth,
}

/// One row of a report: everything measured for a single example.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackRecord {
    pub schema_version: u32,
    /// Index of the example within its dataset.
    pub index: usize,
    pub original_label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_label: Option<Label>,
    /// Euclidean distortion of the final adversarial point, when one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<f64>,
    pub queries: u64,
    pub iterations: u32,
    pub status: RecordStatus,
    /// Whether the final point re-verified as adversarial.
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    /// `(cumulative queries, g)` trace, possibly capped.
    #[serde(default)]
    pub trace: Vec<(u64, f64)>,
    /// Wall-clock duration; in-memory only (see module docs).
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Aggregate over all records of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub examples: usize,
    /// Mean distortion over successful attacks; absent when none succeeded.
    pub avg_l2: Option<f64>,
    /// Mean query count over all records.
    pub avg_queries: f64,
    /// Fraction of records whose final point re-verified as adversarial.
    pub success_rate: f64,
    pub status_counts: BTreeMap<RecordStatus, usize>,
    /// The configuration that produced this summary.
    pub config: ExperimentConfig,
}

/// Computes the summary statistics for a non-empty batch of records.
pub fn summarize(
    records: &[AttackRecord],
    config: &ExperimentConfig,
) -> Result<SummaryReport, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let mut status_counts = BTreeMap::new();
    let mut distortions = Vec::new();
    let mut queries_total: u128 = 0;
    let mut successes = 0usize;
    for record in records {
        *status_counts.entry(record.status).or_insert(0) += 1;
        queries_total += u128::from(record.queries);
        if record.success {
            successes += 1;
            if let Some(d) = record.distortion {
                distortions.push(d);
            }
        }
    }
    let avg_l2 = if distortions.is_empty() {
        None
    } else {
        Some(distortions.iter().sum::<f64>() / distortions.len() as f64)
    };
    Ok(SummaryReport {
        schema_version: SCHEMA_VERSION,
        examples: records.len(),
        avg_l2,
        avg_queries: queries_total as f64 / records.len() as f64,
        success_rate: successes as f64 / records.len() as f64,
        status_counts,
        config: config.clone(),
    })
}

/// Canonical report paths inside an output directory.
pub fn report_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(RECORDS_FILE), dir.join(SUMMARY_FILE))
}

/// Writes `records.jsonl` (one record per line, sorted by example index) and
/// `summary.json` into `dir`. Re-emitting the same data is idempotent.
pub fn emit_report(
    summary: &SummaryReport,
    records: &[AttackRecord],
    dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let (records_path, summary_path) = report_paths(dir);

    let mut sorted: Vec<&AttackRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.index);

    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| HarnessError::Io { path, source }
    };

    let mut buffer = Vec::new();
    for record in &sorted {
        serde_json::to_writer(&mut buffer, record).map_err(HarnessError::Encode)?;
        buffer.push(b'\n');
    }
    write_atomically(&records_path, &buffer).map_err(io_err(&records_path))?;

    let mut summary_bytes = serde_json::to_vec_pretty(summary).map_err(HarnessError::Encode)?;
    summary_bytes.push(b'\n');
    write_atomically(&summary_path, &summary_bytes).map_err(io_err(&summary_path))?;
    Ok(())
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Loads a record file; tolerates arbitrary record order.
pub fn load_records(path: &Path) -> Result<Vec<AttackRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AttackRecord =
            serde_json::from_str(line).map_err(|e| HarnessError::Decode {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_summary(path: &Path) -> Result<SummaryReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Decode {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

/// Caps a trace to at most `cap` points, always keeping the first and last
/// entries; `cap = 0` drops the trace entirely.
pub fn cap_trace(trace: &[(u64, f64)], cap: usize) -> Vec<(u64, f64)> {
    if cap == 0 {
        return Vec::new();
    }
    if trace.len() <= cap {
        return trace.to_vec();
    }
    if cap == 1 {
        return vec![*trace.last().unwrap()];
    }
    let last = trace.len() - 1;
    let mut out = Vec::with_capacity(cap);
    let mut prev = usize::MAX;
    for k in 0..cap {
        let idx = k * last / (cap - 1);
        if idx != prev {
            out.push(trace[idx]);
            prev = idx;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(index: usize, distortion: Option<f64>, success: bool) -> AttackRecord {
        AttackRecord {
            schema_version: SCHEMA_VERSION,
            index,
            original_label: Label(0),
            target_label: None,
            distortion,
            queries: 100,
            iterations: 5,
            status: if success {
                RecordStatus::Converged
            } else {
                RecordStatus::InitFailed
            },
            success,
            error: None,
            x_star: distortion.map(|d| vec![d, 0.0]),
            trace: vec![(10, 1.0), (100, distortion.unwrap_or(1.0))],
            wall_time: Duration::from_millis(3),
        }
    }

    fn test_config() -> ExperimentConfig {
        ExperimentConfig::new("model.json", "data.csv")
    }

    #[test]
    fn summary_means_are_plain_arithmetic() {
        let records = vec![record(0, Some(0.4), true), record(1, Some(0.6), true)];
        let summary = summarize(&records, &test_config()).unwrap();
        assert_eq!(summary.avg_l2, Some(0.5));
        assert_eq!(summary.success_rate, 1.0);
        assert_eq!(summary.avg_queries, 100.0);
    }

    #[test]
    fn summary_averages_distortion_over_successes_only() {
        let records = vec![record(0, Some(0.4), true), record(1, None, false)];
        let summary = summarize(&records, &test_config()).unwrap();
        assert_eq!(summary.avg_l2, Some(0.4));
        assert_eq!(summary.success_rate, 0.5);
        assert_eq!(summary.status_counts[&RecordStatus::InitFailed], 1);
    }

    #[test]
    fn summary_with_no_successes_has_no_avg_l2() {
        let records = vec![record(0, None, false), record(1, None, false)];
        let summary = summarize(&records, &test_config()).unwrap();
        assert_eq!(summary.avg_l2, None);
        assert_eq!(summary.success_rate, 0.0);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(
            summarize(&[], &test_config()),
            Err(HarnessError::EmptyRecords)
        ));
    }

    #[test]
    fn emit_writes_one_line_per_record_plus_summary() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            record(2, Some(0.5), true),
            record(0, Some(0.4), true),
            record(1, Some(0.6), true),
        ];
        let summary = summarize(&records, &test_config()).unwrap();
        emit_report(&summary, &records, dir.path()).unwrap();

        let (records_path, summary_path) = report_paths(dir.path());
        let text = std::fs::read_to_string(&records_path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(summary_path.exists());

        // Lines come out sorted by index and each carries the schema version.
        let loaded = load_records(&records_path).unwrap();
        assert_eq!(
            loaded.iter().map(|r| r.index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!(text.lines().all(|l| l.contains("\"schema_version\":1")));
    }

    #[test]
    fn emit_load_summarize_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![record(0, Some(0.4), true), record(1, None, false)];
        let config = test_config();
        let summary = summarize(&records, &config).unwrap();
        emit_report(&summary, &records, dir.path()).unwrap();
        let (records_path, summary_path) = report_paths(dir.path());
        let reloaded = load_records(&records_path).unwrap();
        let recomputed = summarize(&reloaded, &config).unwrap();
        assert_eq!(recomputed, summary);
        assert_eq!(load_summary(&summary_path).unwrap(), summary);
    }

    #[test]
    fn re_emit_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![record(0, Some(0.4), true)];
        let summary = summarize(&records, &test_config()).unwrap();
        emit_report(&summary, &records, dir.path()).unwrap();
        let (records_path, _) = report_paths(dir.path());
        let first = std::fs::read(&records_path).unwrap();
        emit_report(&summary, &records, dir.path()).unwrap();
        let second = std::fs::read(&records_path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn trace_capping_keeps_first_and_last() {
        let trace: Vec<(u64, f64)> = (0..100)
            .map(|i| (i as u64, 1.0 - i as f64 * 0.01))
            .collect();
        let capped = cap_trace(&trace, 10);
        assert!(capped.len() <= 10);
        assert_eq!(capped.first(), trace.first());
        assert_eq!(capped.last(), trace.last());
        assert_eq!(cap_trace(&trace, 0), vec![]);
        assert_eq!(cap_trace(&trace, 200), trace);
    }
}

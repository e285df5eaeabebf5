//! Batch experiment driver: load a model and a dataset, attack a sample of
//! correctly classified examples, and persist per-example records plus a
//! summary.
//!
//! Determinism is the organizing constraint. Examples are selected by a
//! seeded shuffle; every example's attack runs with a seed derived from
//! `(master seed, example index)`, so results do not depend on worker count
//! or scheduling; and records land on disk sorted by index. Two runs of the
//! same configuration produce byte-identical record files.
//!
//! Long batches are resumable: records stream to the output file as they
//! complete, and a rerun skips indices that already have a record before
//! rewriting the canonical sorted file.

mod report;

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_dataset, Dataset, DatasetError, DatasetRecord};
use crate::distance::AdversarialPredicate;
use crate::oracle::{load_model, Label, LoadError, Oracle};
use crate::parallel;
use crate::rgf::{rgf_attack, AttackError, AttackStatus, RgfConfig};

pub use report::{
    cap_trace, emit_report, load_records, load_summary, report_paths, summarize, AttackRecord,
    RecordStatus, SummaryReport, RECORDS_FILE, SCHEMA_VERSION, SUMMARY_FILE,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] LoadError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("dataset has only {found} correctly classified examples, need {needed}")]
    Shortfall { needed: usize, found: usize },
    #[error("targeted attacks need at least 2 classes, oracle has {0}")]
    TooFewClasses(usize),
    #[error("fixed target {target} equals the original label")]
    TargetEqualsOriginal { target: Label },
    #[error("no records to summarize")]
    EmptyRecords,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot encode report: {0}")]
    Encode(serde_json::Error),
    #[error("{path} line {line}: {message}")]
    Decode {
        path: String,
        line: usize,
        message: String,
    },
}

/// Attack goal for a batch run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "target")]
pub enum AttackMode {
    Untargeted,
    /// Target the next class: `t = (y0 + 1) mod K`.
    TargetedNext,
    /// Target one fixed class for every example.
    TargetedFixed(Label),
}

/// Full description of one batch experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model_path: PathBuf,
    pub dataset_path: PathBuf,
    pub mode: AttackMode,
    /// Examples to attack (sampled without replacement).
    pub n_examples: usize,
    pub rgf: RgfConfig,
    /// Master seed; per-example seeds derive from it and the example index.
    pub seed: u64,
    pub report_dir: PathBuf,
    /// Worker threads (1 = sequential; 0 = runtime default).
    pub workers: usize,
    /// Skip one CSV header line when loading the dataset.
    pub skip_header: bool,
    /// Maximum trace points kept per record (first and last always survive;
    /// 0 drops traces).
    pub trace_cap: usize,
}

impl ExperimentConfig {
    pub fn new(model_path: impl Into<PathBuf>, dataset_path: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            model_path: model_path.into(),
            dataset_path: dataset_path.into(),
            mode: AttackMode::Untargeted,
            n_examples: 10,
            rgf: RgfConfig::default(),
            seed: 0,
            report_dir: PathBuf::from("reports"),
            workers: 1,
            skip_header: false,
            trace_cap: 200,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_examples == 0 {
            return Err(HarnessError::Config("n_examples must be at least 1".into()));
        }
        if !self.model_path.exists() {
            return Err(HarnessError::Config(format!(
                "model file {} does not exist",
                self.model_path.display()
            )));
        }
        if !self.dataset_path.exists() {
            return Err(HarnessError::Config(format!(
                "dataset file {} does not exist",
                self.dataset_path.display()
            )));
        }
        self.rgf
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Stable seed derivation: the same `(master, index)` pair maps to the same
/// per-example seed on every platform and in every release.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0x9E3779B97F4A7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniformly samples `n` dataset indices without replacement, skipping
/// examples the oracle misclassifies (those already violate the attack
/// precondition). Selection queries run on an uncounted oracle fork so they
/// never show up in attack cost.
pub fn select_examples(
    dataset: &Dataset,
    oracle: &Oracle,
    n: usize,
    seed: u64,
) -> Result<Vec<(usize, DatasetRecord)>, HarnessError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if dataset.is_empty() {
        return Err(HarnessError::Config("dataset is empty".into()));
    }
    let probe = oracle.fork();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut selected = Vec::with_capacity(n);
    for index in order {
        if selected.len() == n {
            break;
        }
        let record = &dataset.records[index];
        match probe.classify(&record.features) {
            Ok(label) if label == record.label => selected.push((index, record.clone())),
            Ok(_) => {}
            Err(e) => return Err(HarnessError::Oracle(e)),
        }
    }
    if selected.len() < n {
        return Err(HarnessError::Shortfall {
            needed: n,
            found: selected.len(),
        });
    }
    Ok(selected)
}

/// Resolves the target label for one example under the given mode.
pub fn assign_target(
    record: &DatasetRecord,
    mode: AttackMode,
    classes: usize,
) -> Result<Option<Label>, HarnessError> {
    match mode {
        AttackMode::Untargeted => Ok(None),
        AttackMode::TargetedNext => {
            if classes < 2 {
                return Err(HarnessError::TooFewClasses(classes));
            }
            Ok(Some(Label((record.label.0 + 1) % classes)))
        }
        AttackMode::TargetedFixed(target) => {
            if classes < 2 {
                return Err(HarnessError::TooFewClasses(classes));
            }
            if target == record.label {
                return Err(HarnessError::TargetEqualsOriginal { target });
            }
            Ok(Some(target))
        }
    }
}

/// Everything a finished experiment hands back in memory; the same data is
/// persisted under the report directory.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub summary: SummaryReport,
    pub records: Vec<AttackRecord>,
}

/// Runs the full batch: select examples, attack each with an independently
/// derived seed, stream records to disk, and write the canonical sorted
/// report plus summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let oracle = load_model(&config.model_path)?;
    let dataset = load_dataset(&config.dataset_path, config.skip_header)?;
    dataset.validate_for(oracle.dim(), oracle.num_classes())?;

    let selected = select_examples(&dataset, &oracle, config.n_examples, config.seed)?;

    std::fs::create_dir_all(&config.report_dir).map_err(|source| HarnessError::Io {
        path: config.report_dir.display().to_string(),
        source,
    })?;
    let (records_path, _) = report_paths(&config.report_dir);

    // Resume: keep records for indices that are still part of this run.
    let mut completed: Vec<AttackRecord> = Vec::new();
    if records_path.exists() {
        let existing = load_records(&records_path)?;
        let wanted: std::collections::BTreeSet<usize> = selected.iter().map(|(i, _)| *i).collect();
        completed = existing
            .into_iter()
            .filter(|r| wanted.contains(&r.index) && r.schema_version == SCHEMA_VERSION)
            .collect();
    }
    let done: std::collections::BTreeSet<usize> = completed.iter().map(|r| r.index).collect();
    let pending: Vec<(usize, DatasetRecord)> = selected
        .into_iter()
        .filter(|(i, _)| !done.contains(i))
        .collect();

    let writer = Mutex::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&records_path)
            .map_err(|source| HarnessError::Io {
                path: records_path.display().to_string(),
                source,
            })?,
    );

    let fresh: Vec<AttackRecord> = parallel::map_indexed(pending.len(), config.workers, |i| {
        let (index, record) = &pending[i];
        let attack_record = run_one(&oracle, &dataset, *index, record, config);
        // Stream to the journal as results complete; the canonical sorted
        // file is rewritten below.
        if let Ok(line) = serde_json::to_string(&attack_record) {
            if let Ok(mut file) = writer.lock() {
                use std::io::Write;
                let _ = writeln!(file, "{line}");
            }
        }
        attack_record
    });
    drop(writer);

    let mut records = completed;
    records.extend(fresh);
    records.sort_by_key(|r| r.index);

    let summary = summarize(&records, config)?;
    emit_report(&summary, &records, &config.report_dir)?;
    Ok(ExperimentOutput { summary, records })
}

/// Attacks a single example on a fresh oracle fork, mapping every failure
/// mode into a record rather than an error; one bad example never aborts a
/// batch.
fn run_one(
    oracle: &Oracle,
    dataset: &Dataset,
    index: usize,
    record: &DatasetRecord,
    config: &ExperimentConfig,
) -> AttackRecord {
    let started = Instant::now();
    let mut out = AttackRecord {
        schema_version: SCHEMA_VERSION,
        index,
        original_label: record.label,
        target_label: None,
        distortion: None,
        queries: 0,
        iterations: 0,
        status: RecordStatus::Error,
        success: false,
        error: None,
        x_star: None,
        trace: Vec::new(),
        wall_time: std::time::Duration::ZERO,
    };

    let target = match assign_target(record, config.mode, oracle.num_classes()) {
        Ok(t) => t,
        Err(e) => {
            out.error = Some(e.to_string());
            out.wall_time = started.elapsed();
            return out;
        }
    };
    out.target_label = target;
    let predicate = match target {
        Some(target) => AdversarialPredicate::Targeted { target },
        None => AdversarialPredicate::Untargeted {
            original: record.label,
        },
    };

    let handle = oracle.fork();
    let mut rgf = config.rgf.clone();
    rgf.seed = derive_seed(config.seed, index as u64);

    match rgf_attack(&handle, &record.features, predicate, &dataset.records, &rgf) {
        Ok(result) => {
            out.distortion = Some(result.distortion);
            out.queries = result.total_queries;
            out.iterations = result.iterations;
            out.status = match result.status {
                AttackStatus::Converged => RecordStatus::Converged,
                AttackStatus::BudgetExhausted => RecordStatus::BudgetExhausted,
            };
            out.success = result.adversarial;
            out.x_star = Some(result.x_star.into_vec());
            out.trace = cap_trace(&result.trace, config.trace_cap);
        }
        Err(AttackError::InitFailed {
            budget_exhausted, ..
        }) => {
            // An initialization starved by the budget reports as budget
            // exhaustion; a genuine failure to find any direction reports as
            // such.
            out.queries = handle.query_count();
            out.status = if budget_exhausted {
                RecordStatus::BudgetExhausted
            } else {
                RecordStatus::InitFailed
            };
        }
        Err(e) => {
            out.queries = handle.query_count();
            out.error = Some(e.to_string());
        }
    }
    out.wall_time = started.elapsed();
    out
}

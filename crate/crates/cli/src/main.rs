//! Command-line driver for hard-label black-box attacks.
//!
//! Subcommands:
//!
//! * `attack`: batch attack over a dataset sample, writing a JSONL record
//!   file plus a summary.
//! * `verify`: re-check a report with independent oracles (adversariality,
//!   distortion consistency, ground-truth dominance, convergence gaps).
//! * `ground-truth`: reference optima via closed forms or brute force,
//!   written in the same report format.
//! * `gen-model`: emit the built-in synthetic model files.
//! * `serve`: expose a model file over the line-oriented oracle protocol,
//!   for running attacks against a separate process.
//!
//! Exit codes: 0 on full success, 2 when some per-example checks or attacks
//! failed, 1 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hardlabel::dataset::load_dataset;
use hardlabel::distance::{AdversarialPredicate, SearchParams};
use hardlabel::harness::{
    assign_target, emit_report, load_records, report_paths, select_examples, summarize, AttackMode,
    AttackRecord, ExperimentConfig, RecordStatus, SummaryReport, SCHEMA_VERSION,
};
use hardlabel::oracle::{load_model, serve_stdio, FeatureVector, Label, Model, ModelSpec};
use hardlabel::rgf::{reconstruct_adversarial, RgfConfig};
use hardlabel::vecmath;
use hardlabel::verify::{
    analytic_min_distortion, brute_force_with_options, convergence_trace_metrics,
    BruteForceOptions, GroundTruth, VerifyError,
};

/// Environment variable that overrides every report directory argument.
const REPORT_DIR_ENV: &str = "HARDLABEL_REPORT_DIR";

#[derive(Parser)]
#[command(
    name = "hardlabel",
    version,
    about = "Minimum-distortion adversarial examples from hard-label queries only"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attack a sample of dataset examples and write a report.
    Attack(AttackArgs),
    /// Re-check a report with independent verification oracles.
    Verify(VerifyArgs),
    /// Compute reference optima in the same report format.
    GroundTruth(GroundTruthArgs),
    /// Write one of the built-in synthetic model files.
    GenModel(GenModelArgs),
    /// Serve a model file over the oracle wire protocol (stdin/stdout).
    Serve(ServeArgs),
}

#[derive(Args)]
struct AttackArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Dataset file (CSV: label, then features).
    #[arg(long)]
    dataset: PathBuf,
    /// untargeted | targeted-next | targeted=<class>
    #[arg(long, default_value = "untargeted", value_parser = parse_mode)]
    mode: AttackMode,
    /// Examples to attack.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Oracle query budget per example.
    #[arg(long, default_value_t = 20_000)]
    budget: u64,
    /// Gaussian smoothing radius.
    #[arg(long, default_value_t = 0.005)]
    beta: f64,
    /// Gradient samples per iteration.
    #[arg(long, default_value_t = 20)]
    q: usize,
    /// Fine distance tolerance for reported distortions.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report directory (overridden by HARDLABEL_REPORT_DIR).
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    /// Worker threads over examples (1 = sequential).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip one CSV header line.
    #[arg(long)]
    skip_header: bool,
    /// Maximum trace points stored per record (0 disables traces).
    #[arg(long, default_value_t = 200)]
    trace_cap: usize,
    /// Iteration cap per example.
    #[arg(long, default_value_t = 5_000)]
    max_iterations: u32,
}

#[derive(Args)]
struct VerifyArgs {
    /// Report directory produced by `attack` (or a records.jsonl path).
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Dataset the report was produced from; enables adversariality and
    /// ground-truth checks.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    skip_header: bool,
    /// Directions for brute-force ground truth.
    #[arg(long, default_value_t = 720)]
    directions: usize,
    /// Brute force is skipped above this dimension.
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    /// Allowed slack below ground truth (direction-grid error).
    #[arg(long, default_value_t = 2e-3)]
    slack: f64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct GroundTruthArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "untargeted", value_parser = parse_mode)]
    mode: AttackMode,
    /// Examples to evaluate (sampled exactly like `attack` with the same
    /// seed).
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 720)]
    directions: usize,
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    /// auto | analytic | brute-force
    #[arg(long, default_value = "auto")]
    method: GtMethod,
    /// Report directory (overridden by HARDLABEL_REPORT_DIR).
    #[arg(long, default_value = "ground-truth")]
    out: PathBuf,
    #[arg(long)]
    skip_header: bool,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GtMethod {
    Auto,
    Analytic,
    BruteForce,
}

#[derive(Args)]
struct GenModelArgs {
    /// radial | linear | mlp | gbdt
    #[arg(long)]
    kind: ModelKind,
    /// Input dimension (radial and linear only; mlp and gbdt are 2D).
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    /// Class 1 iff the squared norm reaches 0.4.
    Radial,
    /// Half-space with w = e1, b = 0.5.
    Linear,
    /// Three-class sector model (single identity layer).
    Mlp,
    /// Two-stump ensemble whose adversarial region is a corner quadrant.
    Gbdt,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
}

fn parse_mode(text: &str) -> Result<AttackMode, String> {
    match text {
        "untargeted" => Ok(AttackMode::Untargeted),
        "targeted-next" => Ok(AttackMode::TargetedNext),
        other => match other.strip_prefix("targeted=") {
            Some(label) => label
                .parse::<usize>()
                .map(|l| AttackMode::TargetedFixed(Label(l)))
                .map_err(|_| format!("bad target class {label:?}")),
            None => Err(format!(
                "unknown mode {other:?} (expected untargeted, targeted-next, or targeted=<class>)"
            )),
        },
    }
}

fn report_dir_override(flag: PathBuf) -> PathBuf {
    match std::env::var_os(REPORT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Attack(args) => cmd_attack(args),
        Command::Verify(args) => cmd_verify(args),
        Command::GroundTruth(args) => cmd_ground_truth(args),
        Command::GenModel(args) => cmd_gen_model(args),
        Command::Serve(args) => cmd_serve(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_attack(args: AttackArgs) -> anyhow::Result<ExitCode> {
    let config = ExperimentConfig {
        model_path: args.model,
        dataset_path: args.dataset,
        mode: args.mode,
        n_examples: args.n,
        rgf: RgfConfig {
            beta: args.beta,
            q: args.q,
            query_budget: args.budget,
            max_iterations: args.max_iterations,
            distance_params: SearchParams {
                tolerance: args.tolerance,
                ..SearchParams::default()
            },
            ..RgfConfig::default()
        },
        seed: args.seed,
        report_dir: report_dir_override(args.out),
        workers: args.workers,
        skip_header: args.skip_header,
        trace_cap: args.trace_cap,
    };

    let output = hardlabel::harness::run_experiment(&config)?;
    for record in &output.records {
        print_record_line(record);
    }
    print_summary(&output.summary);
    let (records_path, summary_path) = report_paths(&config.report_dir);
    println!(
        "report: {} and {}",
        records_path.display(),
        summary_path.display()
    );
    Ok(if output.records.iter().all(|r| r.success) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn print_record_line(record: &AttackRecord) {
    let distortion = record
        .distortion
        .map_or("-".to_string(), |d| format!("{d:.6}"));
    let target = record
        .target_label
        .map_or(String::new(), |t| format!(" -> target {t}"));
    println!(
        "example {:>4}: label {}{} distortion {} queries {:>6} status {:?}{} ({} ms)",
        record.index,
        record.original_label,
        target,
        distortion,
        record.queries,
        record.status,
        if record.success { "" } else { " [unverified]" },
        record.wall_time.as_millis(),
    );
}

fn print_summary(summary: &SummaryReport) {
    let avg_l2 = summary
        .avg_l2
        .map_or("-".to_string(), |v| format!("{v:.6}"));
    println!(
        "summary: {} examples, avg L2 {}, avg queries {:.1}, success rate {:.2}",
        summary.examples, avg_l2, summary.avg_queries, summary.success_rate
    );
    for (status, count) in &summary.status_counts {
        println!("  {status:?}: {count}");
    }
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let records_path = if args.report.is_dir() {
        report_paths(&args.report).0
    } else {
        args.report.clone()
    };
    let records = load_records(&records_path)
        .with_context(|| format!("loading {}", records_path.display()))?;
    if records.is_empty() {
        bail!("report {} has no records", records_path.display());
    }
    let oracle = load_model(&args.model)?;
    let dataset = match &args.dataset {
        Some(path) => {
            let ds = load_dataset(path, args.skip_header)?;
            ds.validate_for(oracle.dim(), oracle.num_classes())?;
            Some(ds)
        }
        None => None,
    };

    let mut failures = 0usize;
    let mut ground_truths: std::collections::BTreeMap<usize, GroundTruth> = Default::default();
    for record in &records {
        let mut problems: Vec<String> = Vec::new();
        let predicate = match record.target_label {
            Some(target) => AdversarialPredicate::Targeted { target },
            None => AdversarialPredicate::Untargeted {
                original: record.original_label,
            },
        };

        let x0 = dataset
            .as_ref()
            .and_then(|ds| ds.records.get(record.index))
            .map(|r| r.features.clone());

        if let (Some(x_star), Some(x0)) = (&record.x_star, &x0) {
            match FeatureVector::new(x_star.clone()) {
                Ok(x_star_fv) => {
                    let label = oracle.fork().classify(&x_star_fv)?;
                    if record.success && !predicate.holds(label) {
                        problems.push(format!("x_star classifies as {label}, not adversarial"));
                    }
                    if let Some(distortion) = record.distortion {
                        let measured = vecmath::distance(x_star, x0.as_slice());
                        if (measured - distortion).abs() > 1e-9 {
                            problems.push(format!(
                                "recorded distortion {distortion} but x_star sits at {measured}"
                            ));
                        }
                    }
                }
                Err(e) => problems.push(format!("bad x_star: {e}")),
            }
        }

        if let (Some(x0), Some(distortion)) = (&x0, record.distortion) {
            let gt = match ground_truths.entry(record.index) {
                std::collections::btree_map::Entry::Occupied(entry) => Some(entry.into_mut()),
                std::collections::btree_map::Entry::Vacant(slot) => {
                    match reference_optimum(
                        &oracle,
                        x0,
                        predicate,
                        GtMethod::Auto,
                        args.directions,
                        args.max_dim,
                        args.workers,
                    ) {
                        Ok(Some(gt)) => Some(slot.insert(gt)),
                        Ok(None) => None,
                        Err(e) => {
                            problems.push(format!("ground truth failed: {e}"));
                            None
                        }
                    }
                }
            };
            if let Some(gt) = gt {
                if distortion < gt.min_distortion - args.slack {
                    problems.push(format!(
                        "distortion {distortion} beats ground truth {} beyond slack",
                        gt.min_distortion
                    ));
                }
                let result_view = trace_view(record);
                if let Ok(metrics) = convergence_trace_metrics(&result_view, Some(gt)) {
                    let below: Vec<String> = metrics
                        .first_below
                        .iter()
                        .map(|(threshold, at)| match at {
                            Some(q) => format!("gap<{threshold} @ {q} queries"),
                            None => format!("gap<{threshold} never"),
                        })
                        .collect();
                    println!(
                        "example {:>4}: gap {:+.2e} vs optimum {:.6} ({})",
                        record.index,
                        distortion - gt.min_distortion,
                        gt.min_distortion,
                        below.join(", ")
                    );
                }
            }
        }

        if problems.is_empty() {
            println!("example {:>4}: ok", record.index);
        } else {
            failures += 1;
            for problem in problems {
                println!("example {:>4}: FAIL - {problem}", record.index);
            }
        }
    }
    println!(
        "verify: {} records checked, {} failed",
        records.len(),
        failures
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

/// Minimal attack-result shell so trace metrics can run on a stored record.
fn trace_view(record: &AttackRecord) -> hardlabel::rgf::AttackResult {
    hardlabel::rgf::AttackResult {
        x_star: FeatureVector::new(record.x_star.clone().unwrap_or_else(|| vec![0.0]))
            .unwrap_or_else(|_| FeatureVector::new(vec![0.0]).unwrap()),
        theta_star: hardlabel::distance::Direction::from_unit(vec![1.0]).unwrap(),
        distortion: record.distortion.unwrap_or(0.0),
        total_queries: record.queries,
        iterations: record.iterations,
        trace: record.trace.clone(),
        status: hardlabel::rgf::AttackStatus::Converged,
        adversarial: record.success,
        dropped_samples: 0,
    }
}

fn reference_optimum(
    oracle: &hardlabel::oracle::Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    method: GtMethod,
    directions: usize,
    max_dim: usize,
    workers: usize,
) -> anyhow::Result<Option<GroundTruth>> {
    let untargeted = matches!(predicate, AdversarialPredicate::Untargeted { .. });
    let analytic_applies =
        untargeted && matches!(oracle.model(), Model::Radial(_) | Model::Linear(_));
    match method {
        GtMethod::Analytic => {
            if !analytic_applies {
                bail!("closed forms need an untargeted attack on a radial or linear model");
            }
            Ok(Some(analytic_min_distortion(oracle.model(), x0)?))
        }
        GtMethod::Auto if analytic_applies => {
            Ok(Some(analytic_min_distortion(oracle.model(), x0)?))
        }
        GtMethod::Auto | GtMethod::BruteForce => {
            match brute_force_with_options(
                oracle,
                x0,
                predicate,
                directions,
                &SearchParams::default(),
                BruteForceOptions { max_dim, workers },
            ) {
                Ok(gt) => Ok(Some(gt)),
                Err(VerifyError::DimensionTooHigh { .. }) if method == GtMethod::Auto => {
                    Ok(None) // silently skip; dimension not brute-forceable
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn cmd_ground_truth(args: GroundTruthArgs) -> anyhow::Result<ExitCode> {
    let oracle = load_model(&args.model)?;
    let dataset = load_dataset(&args.dataset, args.skip_header)?;
    if dataset.is_empty() {
        eprintln!("warning: dataset {} is empty", args.dataset.display());
    }
    dataset.validate_for(oracle.dim(), oracle.num_classes())?;
    let selected = select_examples(&dataset, &oracle, args.n, args.seed)?;

    let mut records = Vec::new();
    let mut failures = 0usize;
    for (index, example) in &selected {
        let target = assign_target(example, args.mode, oracle.num_classes())?;
        let predicate = match target {
            Some(target) => AdversarialPredicate::Targeted { target },
            None => AdversarialPredicate::Untargeted {
                original: example.label,
            },
        };
        let mut record = AttackRecord {
            schema_version: SCHEMA_VERSION,
            index: *index,
            original_label: example.label,
            target_label: target,
            distortion: None,
            queries: 0,
            iterations: 0,
            status: RecordStatus::GroundTruth,
            success: false,
            error: None,
            x_star: None,
            trace: Vec::new(),
            wall_time: std::time::Duration::ZERO,
        };
        match reference_optimum(
            &oracle,
            &example.features,
            predicate,
            args.method,
            args.directions,
            args.max_dim,
            args.workers,
        ) {
            Ok(Some(gt)) => {
                let x_star = reconstruct_adversarial(
                    &example.features,
                    &gt.direction,
                    gt.min_distortion.max(f64::MIN_POSITIVE),
                    oracle.bounds(),
                );
                record.distortion = Some(gt.min_distortion);
                record.queries = gt.queries_used;
                record.success = true;
                record.x_star = Some(x_star.into_vec());
                println!(
                    "example {:>4}: optimum {:.6} ({:?}, {} queries)",
                    index, gt.min_distortion, gt.method, gt.queries_used
                );
            }
            Ok(None) => {
                failures += 1;
                record.error = Some("no ground-truth method applies".into());
                println!("example {index:>4}: no ground-truth method applies");
            }
            Err(e) => {
                failures += 1;
                record.error = Some(e.to_string());
                println!("example {index:>4}: FAIL - {e}");
            }
        }
        records.push(record);
    }

    let out_dir = report_dir_override(args.out);
    let config_echo = ExperimentConfig {
        mode: args.mode,
        n_examples: args.n,
        seed: args.seed,
        report_dir: out_dir.clone(),
        workers: args.workers,
        skip_header: args.skip_header,
        trace_cap: 0,
        ..ExperimentConfig::new(&args.model, &args.dataset)
    };
    let summary = summarize(&records, &config_echo)?;
    emit_report(&summary, &records, &out_dir)?;
    print_summary(&summary);
    let (records_path, _) = report_paths(&out_dir);
    println!("report: {}", records_path.display());
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_gen_model(args: GenModelArgs) -> anyhow::Result<ExitCode> {
    let spec = match args.kind {
        ModelKind::Radial => ModelSpec::radial(args.d),
        ModelKind::Linear => ModelSpec::linear_halfspace(args.d),
        ModelKind::Mlp => {
            if args.d != 2 {
                bail!("the built-in mlp model is two-dimensional");
            }
            ModelSpec::three_sector()
        }
        ModelKind::Gbdt => {
            if args.d != 2 {
                bail!("the built-in gbdt model is two-dimensional");
            }
            ModelSpec::corner_stumps()
        }
    };
    if args.d == 0 {
        bail!("dimension must be at least 1");
    }
    let mut text = serde_json::to_string_pretty(&spec)?;
    text.push('\n');
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(args: ServeArgs) -> anyhow::Result<ExitCode> {
    let oracle = load_model(&args.model)?;
    serve_stdio(oracle.model())?;
    Ok(ExitCode::SUCCESS)
}

//! Minimum-distortion adversarial examples against classifiers that expose
//! nothing but a hard-label query interface.
//!
//! The attack never sees scores, gradients, or parameters. Instead of
//! optimizing over the input space directly (a discontinuous problem under
//! hard labels), it optimizes over unit *directions*: for a direction `θ`,
//! the objective is the distance from the original point `x0` to the first
//! point along the ray `x0 + λθ` where the adversarial predicate holds. That
//! ray length is a real-valued, usually continuous function of `θ`, so a
//! randomized gradient-free optimizer can minimize it using only label
//! queries. The adversarial example is reconstructed as
//! `x* = x0 + g(θ*)·θ*/‖θ*‖`.
//!
//! Module map:
//!
//! * [`oracle`]: hard-label oracle handles with query accounting, domain
//!   clamping, and the built-in desk-scale model families (radial, linear,
//!   MLP, GBDT, external process).
//! * [`dataset`]: CSV datasets providing original points and the other-class
//!   examples used to seed search directions.
//! * [`distance`]: ray-length evaluation, from scratch (fixed-step march plus
//!   binary search) or warm-started around a previous value.
//! * [`rgf`]: the randomized gradient-free optimizer with Gaussian-sample
//!   gradient estimation, backtracking line search, and the full attack loop.
//! * [`verify`]: independent oracles (closed forms, brute force, finite
//!   differences) that make attack output checkable; these never touch the
//!   counted query channel.
//! * [`harness`]: batch experiment driver with deterministic seeding,
//!   JSONL + summary reports, and resumable runs.
//!
//! The `parallel` feature (on by default) enables rayon-backed execution for
//! the two data-parallel surfaces: the batch harness and brute-force
//! ground-truth scans. A single attack is always sequential (every oracle
//! query depends on the previous answer), so results are bit-identical
//! regardless of worker count.

pub mod dataset;
pub mod distance;
pub mod harness;
pub mod oracle;
mod parallel;
pub mod rgf;
pub mod vecmath;
pub mod verify;

pub use dataset::{load_dataset, Dataset, DatasetRecord};
pub use distance::{
    binary_search_bracket, evaluate_initial, evaluate_local, initialize_direction,
    AdversarialPredicate, Direction, DistanceError, DistanceEval, DistanceEvaluator,
    DistanceObjective, DistanceStatus, SearchParams,
};
pub use harness::{
    assign_target, derive_seed, emit_report, load_records, load_summary, run_experiment,
    select_examples, summarize, AttackMode, AttackRecord, ExperimentConfig, ExperimentOutput,
    HarnessError, RecordStatus, SummaryReport,
};
pub use oracle::{
    load_model, DomainBounds, FeatureVector, Label, Model, ModelSpec, Oracle, OracleError,
};
pub use rgf::{
    estimate_gradient, line_search_step, reconstruct_adversarial, rgf_attack,
    sample_gaussian_direction, AttackError, AttackResult, AttackStatus, GradientEstimate, OptState,
    RgfConfig, RgfOptimizer,
};
pub use verify::{
    analytic_distance, analytic_min_distortion, brute_force_min_distortion,
    convergence_trace_metrics, finite_difference_gradient, GroundTruth, GroundTruthMethod,
    TraceMetrics, VerifyError,
};

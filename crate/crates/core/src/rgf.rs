//! Randomized gradient-free minimization of the ray-length objective.
//!
//! The optimizer never sees a gradient. Each iteration it draws `q` Gaussian
//! directions `u`, estimates
//!
//! ```text
//! ĝ = mean over samples of (g(θ + β·u) - g(θ)) / β · u
//! ```
//!
//! with warm-started local evaluations, then moves `θ ← θ - η·ĝ` using a
//! backtracking line search: the step size grows geometrically while the
//! objective keeps strictly decreasing and shrinks geometrically until it
//! does, carrying the accepted `η` into the next iteration. Samples whose
//! evaluation finds no boundary are dropped from the average. On repeated
//! step failures the smoothing radius `β` halves down to a floor; stalling
//! there ends the run.
//!
//! The attack driver [`rgf_attack`] wraps the loop with direction
//! initialization from other-class examples, a hard query budget, a final
//! fine-tolerance re-evaluation, and reconstruction of the adversarial point
//! `x* = x0 + g(θ*)·θ*`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetRecord;
use crate::distance::{
    AdversarialPredicate, Direction, DistanceError, DistanceEvaluator, DistanceObjective,
    SearchParams,
};
use crate::oracle::{DomainBounds, FeatureVector, Label, Oracle, OracleError};
use crate::vecmath;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("original point is already adversarial (label {label})")]
    AlreadyAdversarial { label: Label },
    #[error("initialization failed after {candidates_tried} suitable candidates{}",
        if *budget_exhausted { " (query budget exhausted)" } else { "" })]
    InitFailed {
        candidates_tried: usize,
        budget_exhausted: bool,
    },
    #[error("all {attempted} gradient samples failed to find a boundary")]
    GradientEstimationFailed { attempted: usize, queries_used: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Optimizer configuration. Defaults follow the attack's standard operating
/// point: `β = 0.005`, `q = 20` averaged samples, coarse relative distance
/// tolerance during iterations and a fine absolute one for final reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RgfConfig {
    /// Gaussian smoothing radius for the finite-difference estimator.
    pub beta: f64,
    /// Gaussian samples averaged per gradient estimate.
    pub q: usize,
    /// Initial line-search step size.
    pub eta0: f64,
    /// Step-size shrink factor when a trial step does not decrease `g`.
    pub backtrack_factor: f64,
    /// Step-size growth factor while trial steps keep decreasing `g`.
    pub forward_factor: f64,
    /// Cap on shrink (and growth) trials per line search.
    pub max_line_search_steps: u32,
    /// Hard cap on oracle queries for a whole attack run.
    pub query_budget: u64,
    /// Cap on optimizer iterations.
    pub max_iterations: u32,
    /// RNG seed; identical configurations replay identical attacks.
    pub seed: u64,
    /// Ray-search parameters (ratio, ceiling, fine tolerance).
    pub distance_params: SearchParams,
    /// Relative per-iteration distance tolerance; evaluations stop at
    /// `max(iter_tolerance_rel · v, distance_params.tolerance)`.
    pub iter_tolerance_rel: f64,
    /// Candidate examples scanned for the initial direction.
    pub init_tries: usize,
    /// Smallest smoothing radius the failure fallback may reach.
    pub beta_floor: f64,
    /// Consecutive step failures at the beta floor that end the run.
    pub max_step_failures: u32,
}

impl Default for RgfConfig {
    fn default() -> Self {
        RgfConfig {
            beta: 0.005,
            q: 20,
            eta0: 0.2,
            backtrack_factor: 0.5,
            forward_factor: 2.0,
            max_line_search_steps: 15,
            query_budget: 20_000,
            max_iterations: 5_000,
            seed: 0,
            distance_params: SearchParams::default(),
            iter_tolerance_rel: 1e-3,
            init_tries: 10,
            beta_floor: 1e-4,
            max_step_failures: 10,
        }
    }
}

impl RgfConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |msg: String| Err(AttackError::InvalidConfig(msg));
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return bad(format!(
                "beta must be positive and finite, got {}",
                self.beta
            ));
        }
        if self.q == 0 {
            return bad("q must be at least 1".into());
        }
        if self.eta0 <= 0.0 || !self.eta0.is_finite() {
            return bad(format!(
                "eta0 must be positive and finite, got {}",
                self.eta0
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad(format!(
                "backtrack_factor must be in (0, 1), got {}",
                self.backtrack_factor
            ));
        }
        if self.forward_factor <= 1.0 || self.forward_factor.is_nan() {
            return bad(format!(
                "forward_factor must be greater than 1, got {}",
                self.forward_factor
            ));
        }
        if self.query_budget == 0 {
            return bad("query_budget must be positive".into());
        }
        if !(self.beta_floor > 0.0 && self.beta_floor <= self.beta) {
            return bad(format!(
                "beta_floor must be in (0, beta], got {}",
                self.beta_floor
            ));
        }
        if self.max_step_failures == 0 {
            return bad("max_step_failures must be at least 1".into());
        }
        if self.iter_tolerance_rel < 0.0 {
            return bad(format!(
                "iter_tolerance_rel must be non-negative, got {}",
                self.iter_tolerance_rel
            ));
        }
        self.distance_params
            .validate()
            .map_err(|e| AttackError::InvalidConfig(e.to_string()))
    }
}

/// Averaged finite-difference gradient estimate and its query cost.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub queries_used: u64,
    /// Samples whose evaluation found no boundary and were left out of the
    /// average.
    pub dropped_samples: usize,
}

/// Optimizer iterate: direction, its objective value, the carried step size,
/// and the iteration count.
#[derive(Clone, Debug)]
pub struct OptState {
    pub theta: Direction,
    pub g_value: f64,
    pub eta: f64,
    pub iteration: u32,
}

/// How an attack run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackStatus {
    /// Stopped on its own terms: step failures stalled at the beta floor or
    /// the iteration cap was reached.
    Converged,
    /// Stopped by the query budget; the result is the best point so far.
    BudgetExhausted,
}

/// Full outcome of one attack run.
#[derive(Clone, Debug)]
pub struct AttackResult {
    /// Reconstructed adversarial example, clamped to the domain.
    pub x_star: FeatureVector,
    /// Final search direction.
    pub theta_star: Direction,
    /// Euclidean distance from the original point to `x_star`.
    pub distortion: f64,
    /// Oracle queries spent by the attack, exactly.
    pub total_queries: u64,
    /// Optimizer iterations executed.
    pub iterations: u32,
    /// `(cumulative queries, g)` at initialization and after every accepted
    /// step; strictly decreasing in `g`.
    pub trace: Vec<(u64, f64)>,
    pub status: AttackStatus,
    /// Whether `classify(x_star)` satisfies the predicate, re-checked on an
    /// uncounted oracle fork.
    pub adversarial: bool,
    /// Gradient samples dropped across the whole run.
    pub dropped_samples: u64,
}

/// Draws a vector of `d` i.i.d. standard normal entries. Not normalized:
/// the estimator uses the raw sample both for probing and weighting.
pub fn sample_gaussian_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `q`-sample averaged finite-difference gradient estimate at `theta`.
///
/// `g_theta` must be a found evaluation of the objective at `theta`; it warm
/// starts every perturbed evaluation. Samples that find no boundary are
/// dropped from the average; if all of them fail the estimation fails as a
/// whole and the caller may shrink `β` or re-randomize.
pub fn estimate_gradient<O: DistanceObjective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    theta: &Direction,
    g_theta: f64,
    config: &RgfConfig,
    rng: &mut R,
    query_cap: Option<u64>,
) -> Result<GradientEstimate, AttackError> {
    estimate_gradient_with_beta(
        objective,
        theta,
        g_theta,
        config.beta,
        config.q,
        rng,
        query_cap,
    )
}

fn estimate_gradient_with_beta<O: DistanceObjective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    theta: &Direction,
    g_theta: f64,
    beta: f64,
    q: usize,
    rng: &mut R,
    query_cap: Option<u64>,
) -> Result<GradientEstimate, AttackError> {
    let d = objective.dim();
    debug_assert_eq!(theta.dim(), d);
    let mut acc = vec![0.0; d];
    let mut kept = 0usize;
    let mut dropped = 0usize;
    let mut used = 0u64;
    for _ in 0..q {
        let u = sample_gaussian_direction(d, rng);
        let perturbed = vecmath::scaled_add(theta.as_slice(), beta, &u);
        let remaining = query_cap.map(|cap| cap.saturating_sub(used));
        let eval = objective.eval_local(&perturbed, g_theta, remaining)?;
        used += eval.queries_used;
        match eval.value() {
            Some(g_perturbed) => {
                let coefficient = (g_perturbed - g_theta) / beta;
                for (a, ui) in acc.iter_mut().zip(&u) {
                    *a += coefficient * ui;
                }
                kept += 1;
            }
            None => dropped += 1,
        }
    }
    if kept == 0 {
        return Err(AttackError::GradientEstimationFailed {
            attempted: q,
            queries_used: used,
        });
    }
    let scale = 1.0 / kept as f64;
    for a in &mut acc {
        *a *= scale;
    }
    Ok(GradientEstimate {
        vector: acc,
        queries_used: used,
        dropped_samples: dropped,
    })
}

/// Result of one line search: the (possibly unchanged) state, whether a
/// strictly decreasing step was accepted, and the query cost.
#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub state: OptState,
    pub accepted: bool,
    pub queries_used: u64,
}

/// Backtracking line search along `-ĝ` from the current iterate.
///
/// Tries the carried step size first. If it decreases `g`, keeps growing the
/// step geometrically while the decrease continues; otherwise shrinks it up
/// to `max_line_search_steps` times looking for any strict decrease. The
/// accepted step size is carried in the returned state; with no decrease the
/// state comes back unchanged and `accepted` is false.
pub fn line_search_step<O: DistanceObjective + ?Sized>(
    objective: &O,
    state: &OptState,
    grad: &GradientEstimate,
    config: &RgfConfig,
    query_cap: Option<u64>,
) -> Result<LineSearchOutcome, AttackError> {
    let mut used = 0u64;
    let try_eta = |eta: f64, used: &mut u64| -> Result<Option<(Direction, f64)>, AttackError> {
        let raw = vecmath::scaled_add(state.theta.as_slice(), -eta, &grad.vector);
        let candidate = match Direction::normalize(raw) {
            Ok(dir) => dir,
            // A degenerate step (the update cancelled θ) is just a rejection.
            Err(_) => return Ok(None),
        };
        let remaining = query_cap.map(|cap| cap.saturating_sub(*used));
        let eval = objective.eval_local(candidate.as_slice(), state.g_value, remaining)?;
        *used += eval.queries_used;
        Ok(eval.value().map(|v| (candidate, v)))
    };

    let rejected = |used| {
        Ok(LineSearchOutcome {
            state: state.clone(),
            accepted: false,
            queries_used: used,
        })
    };

    let mut eta = state.eta;
    match try_eta(eta, &mut used)? {
        Some((theta, value)) if value < state.g_value => {
            // Greedy growth while the objective keeps strictly decreasing.
            let mut best = (theta, value, eta);
            for _ in 0..config.max_line_search_steps {
                let next_eta = best.2 * config.forward_factor;
                match try_eta(next_eta, &mut used)? {
                    Some((theta, value)) if value < best.1 => best = (theta, value, next_eta),
                    _ => break,
                }
            }
            Ok(LineSearchOutcome {
                state: OptState {
                    theta: best.0,
                    g_value: best.1,
                    eta: best.2,
                    iteration: state.iteration,
                },
                accepted: true,
                queries_used: used,
            })
        }
        _ => {
            for _ in 0..config.max_line_search_steps {
                eta *= config.backtrack_factor;
                if let Some((theta, value)) = try_eta(eta, &mut used)? {
                    if value < state.g_value {
                        return Ok(LineSearchOutcome {
                            state: OptState {
                                theta,
                                g_value: value,
                                eta,
                                iteration: state.iteration,
                            },
                            accepted: true,
                            queries_used: used,
                        });
                    }
                }
            }
            rejected(used)
        }
    }
}

/// Outcome of one optimizer iteration.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub accepted: bool,
    pub estimation_failed: bool,
    pub queries_used: u64,
    pub dropped_samples: usize,
}

/// The iterative core of the attack, exposed step by step so callers can
/// interleave their own diagnostics between iterations.
pub struct RgfOptimizer<'a, O: DistanceObjective + ?Sized> {
    objective: &'a O,
    config: RgfConfig,
    state: OptState,
    rng: ChaCha8Rng,
    beta: f64,
    consecutive_failures: u32,
    total_dropped: u64,
}

impl<'a, O: DistanceObjective + ?Sized> RgfOptimizer<'a, O> {
    pub fn new(
        objective: &'a O,
        theta0: Direction,
        g0: f64,
        config: RgfConfig,
    ) -> Result<Self, AttackError> {
        config.validate()?;
        if theta0.dim() != objective.dim() {
            return Err(AttackError::Distance(DistanceError::DimensionMismatch {
                expected: objective.dim(),
                got: theta0.dim(),
            }));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let beta = config.beta;
        let eta = config.eta0;
        Ok(RgfOptimizer {
            objective,
            config,
            state: OptState {
                theta: theta0,
                g_value: g0,
                eta,
                iteration: 0,
            },
            rng,
            beta,
            consecutive_failures: 0,
            total_dropped: 0,
        })
    }

    pub fn state(&self) -> &OptState {
        &self.state
    }

    /// Current smoothing radius (shrinks on repeated failures).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dropped_samples(&self) -> u64 {
        self.total_dropped
    }

    /// Whether the failure fallback has run out of room: the configured
    /// number of consecutive failures, all with `β` already at its floor.
    pub fn stalled(&self) -> bool {
        self.consecutive_failures >= self.config.max_step_failures
            && self.beta <= self.config.beta_floor
    }

    /// One iteration: estimate the gradient, line-search along it, and fold
    /// failures into the `β`-halving fallback.
    pub fn step(&mut self, query_cap: Option<u64>) -> Result<StepOutcome, AttackError> {
        let grad = match estimate_gradient_with_beta(
            self.objective,
            &self.state.theta,
            self.state.g_value,
            self.beta,
            self.config.q,
            &mut self.rng,
            query_cap,
        ) {
            Ok(grad) => grad,
            Err(AttackError::GradientEstimationFailed {
                queries_used,
                attempted,
            }) => {
                self.state.iteration += 1;
                self.register_failure();
                self.total_dropped += attempted as u64;
                return Ok(StepOutcome {
                    accepted: false,
                    estimation_failed: true,
                    queries_used,
                    dropped_samples: attempted,
                });
            }
            Err(other) => return Err(other),
        };
        self.total_dropped += grad.dropped_samples as u64;
        let mut queries = grad.queries_used;

        if grad.vector.iter().all(|v| *v == 0.0) {
            // Flat estimate: no descent direction to try.
            self.state.iteration += 1;
            self.register_failure();
            return Ok(StepOutcome {
                accepted: false,
                estimation_failed: false,
                queries_used: queries,
                dropped_samples: grad.dropped_samples,
            });
        }

        let remaining = query_cap.map(|cap| cap.saturating_sub(queries));
        let outcome =
            line_search_step(self.objective, &self.state, &grad, &self.config, remaining)?;
        queries += outcome.queries_used;
        let accepted = outcome.accepted;
        self.state = outcome.state;
        self.state.iteration += 1;
        if accepted {
            self.consecutive_failures = 0;
        } else {
            self.register_failure();
        }
        Ok(StepOutcome {
            accepted,
            estimation_failed: false,
            queries_used: queries,
            dropped_samples: grad.dropped_samples,
        })
    }

    fn register_failure(&mut self) {
        self.consecutive_failures += 1;
        if self.beta > self.config.beta_floor {
            self.beta = (self.beta * 0.5).max(self.config.beta_floor);
        }
    }
}

/// Reconstructs the adversarial example `clamp(x0 + g·θ)`.
///
/// `theta` is unit-norm by construction; `g_value` must be positive. The
/// caller re-verifies adversariality; if clamping moved the point, the
/// boundary may sit outside the domain.
pub fn reconstruct_adversarial(
    x0: &FeatureVector,
    theta: &Direction,
    g_value: f64,
    bounds: &DomainBounds,
) -> FeatureVector {
    debug_assert!(g_value > 0.0, "g_value must be positive, got {g_value}");
    let mut point = vecmath::scaled_add(x0.as_slice(), g_value, theta.as_slice());
    bounds.clamp_in_place(&mut point);
    FeatureVector::new(point).expect("clamp of finite inputs is finite")
}

/// Runs the full attack: seed a direction from other-class candidates, then
/// iterate gradient estimation and line search under a hard query budget,
/// re-evaluate the final direction at fine tolerance, and reconstruct the
/// adversarial point.
pub fn rgf_attack(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    candidates: &[DatasetRecord],
    config: &RgfConfig,
) -> Result<AttackResult, AttackError> {
    config.validate()?;
    let budget = config.query_budget;

    let original_label = oracle.classify(x0)?;
    if predicate.holds(original_label) {
        return Err(AttackError::AlreadyAdversarial {
            label: original_label,
        });
    }

    let evaluator = DistanceEvaluator::new(oracle, x0, predicate, config.distance_params.clone())?
        .with_relative_tolerance(config.iter_tolerance_rel);

    let remaining = || budget.saturating_sub(oracle.query_count());
    let (theta0, init_eval) =
        match evaluator.initialize_direction(candidates, config.init_tries, Some(remaining())) {
            Ok(pair) => pair,
            Err(DistanceError::NoInitialDirection { tried }) => {
                return Err(AttackError::InitFailed {
                    candidates_tried: tried,
                    budget_exhausted: oracle.query_count() >= budget,
                });
            }
            Err(other) => return Err(other.into()),
        };
    let g0 = init_eval
        .value()
        .expect("initialization returns a found value");
    let mut trace = vec![(oracle.query_count(), g0)];

    let mut optimizer = RgfOptimizer::new(&evaluator, theta0, g0, config.clone())?;
    let mut status = AttackStatus::Converged;
    loop {
        if oracle.query_count() >= budget {
            status = AttackStatus::BudgetExhausted;
            break;
        }
        if optimizer.state().iteration >= config.max_iterations || optimizer.stalled() {
            break;
        }
        let before = oracle.query_count();
        let outcome = optimizer.step(Some(budget - before))?;
        if outcome.accepted {
            trace.push((oracle.query_count(), optimizer.state().g_value));
        }
        if oracle.query_count() == before {
            // The budget no longer admits a single evaluation.
            status = AttackStatus::BudgetExhausted;
            break;
        }
    }

    // Final polish at fine absolute tolerance so the reported distortion is
    // tight; skipped silently when the budget cannot pay for it.
    let coarse_g = optimizer.state().g_value;
    let theta_star = optimizer.state().theta.clone();
    let fine = DistanceEvaluator::new(oracle, x0, predicate, config.distance_params.clone())?;
    let polish = fine.eval_local_capped(theta_star.as_slice(), coarse_g, Some(remaining()))?;
    let g_final = polish.value().map_or(coarse_g, |v| v.min(coarse_g));
    if g_final < trace.last().map_or(f64::INFINITY, |(_, g)| *g) {
        trace.push((oracle.query_count(), g_final));
    }

    let x_star = reconstruct_adversarial(x0, &theta_star, g_final, oracle.bounds());
    let verifier = oracle.fork();
    let adversarial = predicate.holds(verifier.classify(&x_star)?);
    let distortion = vecmath::distance(x_star.as_slice(), x0.as_slice());

    Ok(AttackResult {
        x_star,
        theta_star,
        distortion,
        total_queries: oracle.query_count(),
        iterations: optimizer.state().iteration,
        trace,
        status,
        adversarial,
        dropped_samples: optimizer.dropped_samples(),
    })
}

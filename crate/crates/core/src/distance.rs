//! Ray-length evaluation: how far from `x0`, along a unit direction, until
//! the adversarial predicate first holds.
//!
//! For a direction `θ` the objective is
//!
//! ```text
//! g(θ) = min { λ > 0 : predicate(f(clamp(x0 + λ·θ/‖θ‖))) }
//! ```
//!
//! where the predicate is either "label differs from the original" or "label
//! equals the target". `g` cannot be read off the oracle directly, but it can
//! be computed to any precision with label queries alone:
//!
//! * **From scratch** ([`evaluate_initial`]): march outward in fixed steps
//!   until the predicate first flips, then binary-search the flip bracket.
//! * **Locally** ([`evaluate_local`]): given a previous value `v`, grow the
//!   upper end by a ratio `(1+α)` while the predicate still fails at it, or
//!   shrink the lower end by `(1-α)` while it still holds, then
//!   binary-search. Near a known value this costs only a handful of queries,
//!   which is what makes the optimizer affordable.
//!
//! All query points are clamped into the oracle's domain before being sent,
//! so the searched ray is effectively the clamped ray.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetRecord;
use crate::oracle::{FeatureVector, Label, Oracle, OracleError};
use crate::vecmath;

/// Directions below this norm are rejected as numerically zero.
const MIN_NORM: f64 = 1e-300;

/// Unit-norm tolerance for [`Direction::from_unit`].
const UNIT_NORM_TOL: f64 = 1e-9;

/// Shrink floor: a boundary below this ray length is reported as found at
/// the numerical floor rather than searched further.
const SHRINK_FLOOR: f64 = 1e-12;

/// Fine-grained stage subdivisions when the search is launched toward a
/// known example of the target class.
const CANDIDATE_SUBDIVISIONS: u32 = 20;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("direction is numerically zero")]
    ZeroDirection,
    #[error("direction has a non-finite entry at index {index}")]
    NonFiniteDirection { index: usize },
    #[error("direction norm {norm} is not within {UNIT_NORM_TOL} of 1")]
    NotUnitNorm { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bracket: requires fail at v_left < hold at v_right, got v_left={v_left}, v_right={v_right}")]
    InvalidBracket { v_left: f64, v_right: f64 },
    #[error("invalid search parameter: {0}")]
    InvalidParams(String),
    #[error("previous value must be positive and finite, got {0}")]
    InvalidWarmStart(f64),
    #[error("no initial direction found among {tried} suitable candidates")]
    NoInitialDirection { tried: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A unit-norm search direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes an arbitrary non-zero vector.
    pub fn normalize(values: Vec<f64>) -> Result<Self, DistanceError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DistanceError::NonFiniteDirection { index });
        }
        let norm = vecmath::norm(&values);
        if norm < MIN_NORM {
            return Err(DistanceError::ZeroDirection);
        }
        let mut out = values;
        for v in &mut out {
            *v /= norm;
        }
        Ok(Direction(out))
    }

    /// Accepts a vector that is already unit-norm (within `1e-9`); rejects
    /// anything else rather than silently rescaling.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, DistanceError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DistanceError::NonFiniteDirection { index });
        }
        let norm = vecmath::norm(&values);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(DistanceError::NotUnitNorm { norm });
        }
        Ok(Direction(values))
    }

    /// Unit vector pointing from `from` toward `to`.
    pub fn between(from: &[f64], to: &[f64]) -> Result<Self, DistanceError> {
        Self::normalize(vecmath::sub(to, from))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Direction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// What counts as a successful attack at a query point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversarialPredicate {
    /// Any label other than the original one.
    Untargeted { original: Label },
    /// Exactly the chosen target label.
    Targeted { target: Label },
}

impl AdversarialPredicate {
    pub fn holds(&self, label: Label) -> bool {
        match self {
            AdversarialPredicate::Untargeted { original } => label != *original,
            AdversarialPredicate::Targeted { target } => label == *target,
        }
    }

    /// Whether a dataset example of class `label` can seed a search
    /// direction for this predicate.
    pub fn suits_candidate(&self, label: Label) -> bool {
        self.holds(label)
    }

    pub fn target(&self) -> Option<Label> {
        match self {
            AdversarialPredicate::Untargeted { .. } => None,
            AdversarialPredicate::Targeted { target } => Some(*target),
        }
    }
}

/// Outcome of one ray-length computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DistanceStatus {
    /// The predicate holds at `value` and fails at `value - w` for the final
    /// bracket width `w <= tolerance`.
    Found(f64),
    /// The search ran out of ceiling, expansion steps, query budget, or left
    /// the domain before the predicate ever held.
    NoBoundaryWithinBudget,
}

/// One ray-length evaluation: result plus its exact query cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEval {
    pub status: DistanceStatus,
    pub queries_used: u64,
}

impl DistanceEval {
    pub fn value(&self) -> Option<f64> {
        match self.status {
            DistanceStatus::Found(v) => Some(v),
            DistanceStatus::NoBoundaryWithinBudget => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self.status, DistanceStatus::Found(_))
    }
}

/// Knobs for the ray search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Grow/shrink ratio for the local bracket hunt.
    pub alpha_ratio: f64,
    /// Step of the fine-grained initial march. `None` derives a default:
    /// the candidate distance over 20 when launched toward a known example,
    /// `0.02·√d` otherwise.
    pub init_step: Option<f64>,
    /// Absolute stopping tolerance for the binary search.
    pub tolerance: f64,
    /// Ray-length ceiling; searches that pass it report no boundary.
    pub max_lambda: f64,
    /// Cap on `(1+α)` expansion steps during a local evaluation.
    pub max_expansion_steps: u32,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            alpha_ratio: 0.01,
            init_step: None,
            tolerance: 1e-6,
            max_lambda: 1e3,
            max_expansion_steps: 200,
        }
    }
}

impl SearchParams {
    /// Defaults with the ceiling set to the domain diameter when the domain
    /// is a finite box.
    pub fn for_oracle(oracle: &Oracle) -> Self {
        let mut params = SearchParams::default();
        if let Some(diameter) = oracle.bounds().diameter() {
            params.max_lambda = diameter;
        }
        params
    }

    pub fn validate(&self) -> Result<(), DistanceError> {
        if !(self.alpha_ratio > 0.0 && self.alpha_ratio < 1.0) {
            return Err(DistanceError::InvalidParams(format!(
                "alpha_ratio must be in (0, 1), got {}",
                self.alpha_ratio
            )));
        }
        if self.tolerance <= 0.0 || !self.tolerance.is_finite() {
            return Err(DistanceError::InvalidParams(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if self.max_lambda <= 0.0 || self.max_lambda.is_nan() {
            return Err(DistanceError::InvalidParams(format!(
                "max_lambda must be positive, got {}",
                self.max_lambda
            )));
        }
        if let Some(step) = self.init_step {
            if step <= 0.0 || !step.is_finite() {
                return Err(DistanceError::InvalidParams(format!(
                    "init_step must be positive and finite, got {step}"
                )));
            }
        }
        Ok(())
    }
}

/// Anything the optimizer can treat as the ray-length objective.
///
/// `theta` arrives as a raw, not necessarily unit, vector. Oracle-backed
/// implementations normalize at entry (the objective is scale-invariant in
/// the direction); synthetic test objectives may use the raw vector.
pub trait DistanceObjective {
    fn dim(&self) -> usize;

    /// Absolute floor on the evaluation error. Relative-tolerance evaluators
    /// may err by more at large values; finite-difference probes should use
    /// a fine absolute-tolerance evaluator.
    fn tolerance(&self) -> f64;

    /// Evaluates near a previous value, spending at most `query_cap` oracle
    /// queries when a cap is given (a capped-out search reports no boundary).
    fn eval_local(
        &self,
        theta: &[f64],
        v_prev: f64,
        query_cap: Option<u64>,
    ) -> Result<DistanceEval, DistanceError>;
}

/// Ray-length evaluator bound to `(oracle, x0, predicate)`.
///
/// With `relative_tolerance` set, each evaluation stops at
/// `max(relative_tolerance · v_prev, params.tolerance)`, which keeps the
/// per-evaluation query count roughly constant as the distance shrinks.
pub struct DistanceEvaluator<'a> {
    oracle: &'a Oracle,
    x0: Vec<f64>,
    predicate: AdversarialPredicate,
    params: SearchParams,
    relative_tolerance: f64,
}

impl<'a> DistanceEvaluator<'a> {
    pub fn new(
        oracle: &'a Oracle,
        x0: &FeatureVector,
        predicate: AdversarialPredicate,
        params: SearchParams,
    ) -> Result<Self, DistanceError> {
        params.validate()?;
        if x0.dim() != oracle.dim() {
            return Err(DistanceError::DimensionMismatch {
                expected: oracle.dim(),
                got: x0.dim(),
            });
        }
        Ok(DistanceEvaluator {
            oracle,
            x0: x0.as_slice().to_vec(),
            predicate,
            params,
            relative_tolerance: 0.0,
        })
    }

    /// Enables relative stopping tolerance (0 keeps it purely absolute).
    pub fn with_relative_tolerance(mut self, relative: f64) -> Self {
        self.relative_tolerance = relative.max(0.0);
        self
    }

    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    pub fn predicate(&self) -> &AdversarialPredicate {
        &self.predicate
    }

    pub fn oracle(&self) -> &Oracle {
        self.oracle
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn tolerance_for(&self, scale: f64) -> f64 {
        (self.relative_tolerance * scale.abs()).max(self.params.tolerance)
    }

    /// Clamped query point `clamp(x0 + λθ)`.
    fn point(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        let mut p = vecmath::scaled_add(&self.x0, lambda, theta);
        self.oracle.bounds().clamp_in_place(&mut p);
        p
    }

    /// Queries the predicate at `λ`; `Ok(None)` means the query cap was hit
    /// before the oracle was consulted.
    fn probe(
        &self,
        theta: &[f64],
        lambda: f64,
        used: &mut u64,
        cap: Option<u64>,
    ) -> Result<Option<(bool, Vec<f64>)>, DistanceError> {
        if let Some(cap) = cap {
            if *used >= cap {
                return Ok(None);
            }
        }
        let point = self.point(theta, lambda);
        let label = self.oracle.classify_raw(&point)?;
        *used += 1;
        Ok(Some((self.predicate.holds(label), point)))
    }

    /// Bisects a bracket where the predicate fails at `v_left` and holds at
    /// `v_right`, down to width `tolerance`. Uses exactly
    /// `⌈log2((v_right - v_left) / tolerance)⌉` queries: the iteration count
    /// is fixed up front by pure width halving, so midpoint rounding can
    /// never add a query at power-of-two ratios.
    fn bisect(
        &self,
        theta: &[f64],
        mut v_left: f64,
        mut v_right: f64,
        tolerance: f64,
        used: &mut u64,
        cap: Option<u64>,
    ) -> Result<Option<f64>, DistanceError> {
        let mut remaining = {
            let mut width = v_right - v_left;
            let mut steps = 0u32;
            while width > tolerance {
                width *= 0.5;
                steps += 1;
            }
            steps
        };
        while remaining > 0 {
            let mid = 0.5 * (v_left + v_right);
            if mid <= v_left || mid >= v_right {
                // Bracket narrower than f64 resolution; nothing left to ask.
                break;
            }
            match self.probe(theta, mid, used, cap)? {
                None => return Ok(None),
                Some((true, _)) => v_right = mid,
                Some((false, _)) => v_left = mid,
            }
            remaining -= 1;
        }
        Ok(Some(v_right))
    }

    /// Fine-grained march from `x0` in steps of `step` up to `ceiling`, then
    /// binary search of the first flip bracket.
    fn initial_march(
        &self,
        theta: &[f64],
        step: f64,
        ceiling: f64,
        max_steps: Option<u32>,
        used: &mut u64,
        cap: Option<u64>,
    ) -> Result<DistanceStatus, DistanceError> {
        let mut prev_lambda = 0.0;
        let mut prev_point = self.x0.clone();
        self.oracle.bounds().clamp_in_place(&mut prev_point);
        let mut i: u32 = 1;
        loop {
            if let Some(max) = max_steps {
                if i > max {
                    return Ok(DistanceStatus::NoBoundaryWithinBudget);
                }
            }
            let lambda = match max_steps {
                // Bounded stage: land exactly on the ceiling at the last step.
                Some(max) => ceiling * f64::from(i) / f64::from(max),
                None => step * f64::from(i),
            };
            if lambda > ceiling * (1.0 + 1e-12) {
                return Ok(DistanceStatus::NoBoundaryWithinBudget);
            }
            match self.probe(theta, lambda, used, cap)? {
                None => return Ok(DistanceStatus::NoBoundaryWithinBudget),
                Some((holds, point)) => {
                    if point == prev_point {
                        // Fully clamped: the ray left the domain.
                        return Ok(DistanceStatus::NoBoundaryWithinBudget);
                    }
                    if holds {
                        let tol = self.tolerance_for(lambda);
                        return Ok(
                            match self.bisect(theta, prev_lambda, lambda, tol, used, cap)? {
                                None => DistanceStatus::NoBoundaryWithinBudget,
                                Some(v) => DistanceStatus::Found(v),
                            },
                        );
                    }
                    prev_lambda = lambda;
                    prev_point = point;
                }
            }
            i += 1;
        }
    }

    /// From-scratch evaluation; the caller guarantees `x0` itself is not
    /// adversarial.
    pub fn eval_initial(&self, theta: &Direction) -> Result<DistanceEval, DistanceError> {
        self.eval_initial_capped(theta, None)
    }

    pub fn eval_initial_capped(
        &self,
        theta: &Direction,
        cap: Option<u64>,
    ) -> Result<DistanceEval, DistanceError> {
        self.check_dim(theta.dim())?;
        let step = self
            .params
            .init_step
            .unwrap_or_else(|| 0.02 * (self.x0.len() as f64).sqrt());
        let mut used = 0;
        let status = self.initial_march(
            theta.as_slice(),
            step,
            self.params.max_lambda,
            None,
            &mut used,
            cap,
        )?;
        Ok(DistanceEval {
            status,
            queries_used: used,
        })
    }

    /// From-scratch evaluation toward a known example of the target class at
    /// distance `radius`: the march is bounded by `radius` and uses
    /// `radius / 20` steps.
    pub fn eval_initial_toward_candidate(
        &self,
        theta: &Direction,
        radius: f64,
        cap: Option<u64>,
    ) -> Result<DistanceEval, DistanceError> {
        self.check_dim(theta.dim())?;
        if radius <= 0.0 || !radius.is_finite() {
            return Err(DistanceError::InvalidParams(format!(
                "candidate radius must be positive and finite, got {radius}"
            )));
        }
        let mut used = 0;
        let status = self.initial_march(
            theta.as_slice(),
            radius / f64::from(CANDIDATE_SUBDIVISIONS),
            radius,
            Some(CANDIDATE_SUBDIVISIONS),
            &mut used,
            cap,
        )?;
        Ok(DistanceEval {
            status,
            queries_used: used,
        })
    }

    /// Warm-started evaluation around a previous value `v_prev`.
    pub fn eval_local(
        &self,
        theta: &Direction,
        v_prev: f64,
    ) -> Result<DistanceEval, DistanceError> {
        self.eval_local_capped(theta.as_slice(), v_prev, None)
    }

    /// Core of the local search. `theta` may be any non-zero vector; it is
    /// normalized at entry, so the result is scale-invariant in `theta`.
    pub fn eval_local_capped(
        &self,
        theta: &[f64],
        v_prev: f64,
        cap: Option<u64>,
    ) -> Result<DistanceEval, DistanceError> {
        self.check_dim(theta.len())?;
        if v_prev <= 0.0 || !v_prev.is_finite() {
            return Err(DistanceError::InvalidWarmStart(v_prev));
        }
        let unit = Direction::normalize(theta.to_vec())?;
        let theta = unit.as_slice();
        let alpha = self.params.alpha_ratio;
        let mut used = 0;

        let (holds_at_v, point_at_v) = match self.probe(theta, v_prev, &mut used, cap)? {
            None => return Ok(self.no_boundary(used)),
            Some(r) => r,
        };

        let (v_left, v_right) = if holds_at_v {
            // Shrink the lower end until the predicate fails there.
            let v_right = v_prev;
            let mut v_left = (1.0 - alpha) * v_prev;
            loop {
                if v_left <= SHRINK_FLOOR {
                    // Boundary at or below the numerical floor.
                    return Ok(DistanceEval {
                        status: DistanceStatus::Found(v_left.max(0.0)),
                        queries_used: used,
                    });
                }
                match self.probe(theta, v_left, &mut used, cap)? {
                    None => return Ok(self.no_boundary(used)),
                    Some((true, _)) => v_left *= 1.0 - alpha,
                    Some((false, _)) => break,
                }
            }
            (v_left, v_right)
        } else {
            // Grow the upper end until the predicate holds there.
            let v_left = v_prev;
            let mut v_right = (1.0 + alpha) * v_prev;
            let mut steps = 0;
            let mut prev_point = point_at_v;
            loop {
                if steps > self.params.max_expansion_steps || v_right > self.params.max_lambda {
                    return Ok(self.no_boundary(used));
                }
                match self.probe(theta, v_right, &mut used, cap)? {
                    None => return Ok(self.no_boundary(used)),
                    Some((holds, point)) => {
                        if point == prev_point {
                            // Clamped point stopped moving; no boundary ahead.
                            return Ok(self.no_boundary(used));
                        }
                        if holds {
                            break;
                        }
                        prev_point = point;
                    }
                }
                v_right *= 1.0 + alpha;
                steps += 1;
            }
            (v_left, v_right)
        };

        let tol = self.tolerance_for(v_prev);
        match self.bisect(theta, v_left, v_right, tol, &mut used, cap)? {
            None => Ok(self.no_boundary(used)),
            Some(v) => Ok(DistanceEval {
                status: DistanceStatus::Found(v),
                queries_used: used,
            }),
        }
    }

    /// Scans candidate examples of the predicate's class, evaluates the
    /// direction toward each, and keeps the closest boundary.
    ///
    /// The returned evaluation's `queries_used` is the total across the
    /// whole scan, not just the winning candidate.
    pub fn initialize_direction(
        &self,
        candidates: &[DatasetRecord],
        n_tries: usize,
        cap: Option<u64>,
    ) -> Result<(Direction, DistanceEval), DistanceError> {
        let mut best: Option<(Direction, f64)> = None;
        let mut total_queries = 0;
        let mut tried = 0;
        for record in candidates {
            if tried >= n_tries {
                break;
            }
            if !self.predicate.suits_candidate(record.label) {
                continue;
            }
            let offset = vecmath::sub(record.features.as_slice(), &self.x0);
            let radius = vecmath::norm(&offset);
            if radius < MIN_NORM {
                continue;
            }
            tried += 1;
            let theta = Direction::normalize(offset)?;
            let remaining = cap.map(|c| c.saturating_sub(total_queries));
            let eval = self.eval_initial_toward_candidate(&theta, radius, remaining)?;
            total_queries += eval.queries_used;
            if let Some(value) = eval.value() {
                if best.as_ref().is_none_or(|(_, b)| value < *b) {
                    best = Some((theta, value));
                }
            }
        }
        match best {
            Some((theta, value)) => Ok((
                theta,
                DistanceEval {
                    status: DistanceStatus::Found(value),
                    queries_used: total_queries,
                },
            )),
            None => Err(DistanceError::NoInitialDirection { tried }),
        }
    }

    fn no_boundary(&self, used: u64) -> DistanceEval {
        DistanceEval {
            status: DistanceStatus::NoBoundaryWithinBudget,
            queries_used: used,
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), DistanceError> {
        if got != self.x0.len() {
            return Err(DistanceError::DimensionMismatch {
                expected: self.x0.len(),
                got,
            });
        }
        Ok(())
    }
}

impl DistanceObjective for DistanceEvaluator<'_> {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn tolerance(&self) -> f64 {
        self.params.tolerance
    }

    fn eval_local(
        &self,
        theta: &[f64],
        v_prev: f64,
        query_cap: Option<u64>,
    ) -> Result<DistanceEval, DistanceError> {
        self.eval_local_capped(theta, v_prev, query_cap)
    }
}

/// From-scratch ray-length evaluation: fixed-step march, then binary search.
pub fn evaluate_initial(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    theta: &Direction,
    params: &SearchParams,
) -> Result<DistanceEval, DistanceError> {
    DistanceEvaluator::new(oracle, x0, predicate, params.clone())?.eval_initial(theta)
}

/// Warm-started ray-length evaluation around `v_prev`.
pub fn evaluate_local(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    theta: &Direction,
    v_prev: f64,
    params: &SearchParams,
) -> Result<DistanceEval, DistanceError> {
    DistanceEvaluator::new(oracle, x0, predicate, params.clone())?.eval_local(theta, v_prev)
}

/// Bisects a bracket with the predicate failing at `v_left` and holding at
/// `v_right` down to `tolerance`, returning the adversarial-side endpoint.
///
/// Uses exactly `⌈log2((v_right - v_left) / tolerance)⌉` oracle queries. The
/// endpoint predicate states are the caller's contract; they are never
/// re-queried here, so a violated contract yields a meaningless value rather
/// than an error. Degenerate brackets (`v_left >= v_right`) are rejected.
pub fn binary_search_bracket(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    theta: &Direction,
    v_left: f64,
    v_right: f64,
    tolerance: f64,
) -> Result<f64, DistanceError> {
    if tolerance <= 0.0 || !tolerance.is_finite() {
        return Err(DistanceError::InvalidParams(format!(
            "tolerance must be positive and finite, got {tolerance}"
        )));
    }
    if v_left >= v_right || !v_left.is_finite() || !v_right.is_finite() {
        return Err(DistanceError::InvalidBracket { v_left, v_right });
    }
    let evaluator = DistanceEvaluator::new(oracle, x0, predicate, SearchParams::default())?;
    evaluator.check_dim(theta.dim())?;
    let mut used = 0;
    Ok(evaluator
        .bisect(
            theta.as_slice(),
            v_left,
            v_right,
            tolerance,
            &mut used,
            None,
        )?
        .expect("uncapped bisection always completes"))
}

/// Picks the best initial direction by scanning dataset examples of the
/// predicate's class and evaluating the direction toward each.
pub fn initialize_direction(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    candidates: &[DatasetRecord],
    n_tries: usize,
    params: &SearchParams,
) -> Result<(Direction, DistanceEval), DistanceError> {
    DistanceEvaluator::new(oracle, x0, predicate, params.clone())?
        .initialize_direction(candidates, n_tries, None)
}

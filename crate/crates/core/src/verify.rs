//! Independent checks that make attack results falsifiable.
//!
//! Everything here computes reference values through channels the attack
//! does not use: closed-form crossing distances on radial and linear models,
//! brute-force minima over densely sampled directions, and central-difference
//! gradients of the ray-length objective. Brute force forks the oracle
//! internally, so verification can never inflate a counted query total.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{
    AdversarialPredicate, Direction, DistanceError, DistanceEvaluator, DistanceObjective,
    SearchParams,
};
use crate::oracle::{FeatureVector, Model, Oracle};
use crate::parallel;
use crate::rgf::AttackResult;
use crate::vecmath;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("closed-form distances are only defined for radial and linear models")]
    UnsupportedModel,
    #[error("dimension {dim} exceeds the brute-force limit {limit}; raise max_dim to override")]
    DimensionTooHigh { dim: usize, limit: usize },
    #[error("no sampled direction found an adversarial point")]
    NoAdversarialFound,
    #[error("need at least {needed} directions, got {got}")]
    TooFewDirections { needed: usize, got: usize },
    #[error("finite-difference step {h} must exceed 10x the evaluation tolerance {tolerance}")]
    StepTooSmall { h: f64, tolerance: f64 },
    #[error("finite differences found no boundary at coordinates {coordinates:?}")]
    CoordinatesFailed { coordinates: Vec<usize> },
    #[error("convergence trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthMethod {
    ClosedForm,
    BruteForce,
}

/// Reference minimum distortion for one original point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub min_distortion: f64,
    pub direction: Direction,
    pub method: GroundTruthMethod,
    /// Oracle queries the computation spent (on its own uncounted fork).
    pub queries_used: u64,
}

/// Closed-form crossing distance from `x0` along `theta`, or `None` when the
/// ray never crosses.
///
/// Radial models solve `‖x0 + λθ‖² = r²` for the smallest positive root.
/// Linear models cross at `(b - w·x0) / (w·θ)` when `x0` lies strictly
/// inside the half-space and the direction points toward the boundary.
pub fn analytic_distance(
    model: &Model,
    x0: &FeatureVector,
    theta: &Direction,
) -> Result<Option<f64>, VerifyError> {
    match model {
        Model::Radial(radial) => {
            let p = vecmath::dot(x0.as_slice(), theta.as_slice());
            let c = vecmath::norm_sq(x0.as_slice()) - radial.r_sq;
            let disc = p * p - c;
            if disc < 0.0 {
                return Ok(None);
            }
            let sqrt_disc = disc.sqrt();
            let low = -p - sqrt_disc;
            let high = -p + sqrt_disc;
            if low > 0.0 {
                Ok(Some(low))
            } else if high > 0.0 {
                Ok(Some(high))
            } else {
                Ok(None)
            }
        }
        Model::Linear(linear) => {
            let along = vecmath::dot(&linear.w, theta.as_slice());
            let margin = linear.b - vecmath::dot(&linear.w, x0.as_slice());
            if margin > 0.0 && along > 0.0 {
                Ok(Some(margin / along))
            } else {
                Ok(None)
            }
        }
        _ => Err(VerifyError::UnsupportedModel),
    }
}

/// Closed-form minimum distortion over all directions (the untargeted
/// optimum) for radial and linear models, with its achieving direction.
pub fn analytic_min_distortion(
    model: &Model,
    x0: &FeatureVector,
) -> Result<GroundTruth, VerifyError> {
    match model {
        Model::Radial(radial) => {
            let s = vecmath::norm(x0.as_slice());
            let r = radial.r_sq.sqrt();
            let direction = if s > 1e-12 {
                let outward = x0.as_slice().to_vec();
                if s < r {
                    Direction::normalize(outward)?
                } else {
                    Direction::normalize(outward.iter().map(|v| -v).collect())?
                }
            } else {
                let mut e1 = vec![0.0; x0.dim()];
                e1[0] = 1.0;
                Direction::from_unit(e1)?
            };
            Ok(GroundTruth {
                min_distortion: (r - s).abs(),
                direction,
                method: GroundTruthMethod::ClosedForm,
                queries_used: 0,
            })
        }
        Model::Linear(linear) => {
            let w_norm = vecmath::norm(&linear.w);
            let margin = linear.b - vecmath::dot(&linear.w, x0.as_slice());
            let direction = if margin >= 0.0 {
                Direction::normalize(linear.w.clone())?
            } else {
                Direction::normalize(linear.w.iter().map(|v| -v).collect())?
            };
            Ok(GroundTruth {
                min_distortion: margin.abs() / w_norm,
                direction,
                method: GroundTruthMethod::ClosedForm,
                queries_used: 0,
            })
        }
        _ => Err(VerifyError::UnsupportedModel),
    }
}

/// Options for the brute-force scan.
#[derive(Clone, Copy, Debug)]
pub struct BruteForceOptions {
    /// Dimensions above this are rejected; direction-sampling error grows
    /// quickly with dimension.
    pub max_dim: usize,
    /// Worker threads (0 picks the runtime default; 1 forces sequential).
    pub workers: usize,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            max_dim: 3,
            workers: 0,
        }
    }
}

/// Brute-force minimum distortion over `n_directions` deterministic
/// low-discrepancy unit directions, each evaluated from scratch at the
/// parameters' tolerance. Runs on an uncounted fork of `oracle`.
pub fn brute_force_min_distortion(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    n_directions: usize,
    params: &SearchParams,
) -> Result<GroundTruth, VerifyError> {
    brute_force_with_options(
        oracle,
        x0,
        predicate,
        n_directions,
        params,
        BruteForceOptions::default(),
    )
}

/// [`brute_force_min_distortion`] with an explicit dimension limit and
/// worker count.
pub fn brute_force_with_options(
    oracle: &Oracle,
    x0: &FeatureVector,
    predicate: AdversarialPredicate,
    n_directions: usize,
    params: &SearchParams,
    options: BruteForceOptions,
) -> Result<GroundTruth, VerifyError> {
    let dim = oracle.dim();
    if dim > options.max_dim {
        return Err(VerifyError::DimensionTooHigh {
            dim,
            limit: options.max_dim,
        });
    }
    if n_directions < 2 {
        return Err(VerifyError::TooFewDirections {
            needed: 2,
            got: n_directions,
        });
    }
    let directions = sphere_directions(dim, n_directions)?;
    let probe = oracle.fork();
    let evaluator = DistanceEvaluator::new(&probe, x0, predicate, params.clone())?;

    let evals = parallel::map_indexed(directions.len(), options.workers, |i| {
        evaluator.eval_initial(&directions[i])
    });

    let mut best: Option<(f64, usize)> = None;
    let mut queries = 0;
    for (i, eval) in evals.into_iter().enumerate() {
        let eval = eval?;
        queries += eval.queries_used;
        if let Some(value) = eval.value() {
            if best.is_none_or(|(b, _)| value < b) {
                best = Some((value, i));
            }
        }
    }
    match best {
        Some((value, index)) => Ok(GroundTruth {
            min_distortion: value,
            direction: directions[index].clone(),
            method: GroundTruthMethod::BruteForce,
            queries_used: queries,
        }),
        None => Err(VerifyError::NoAdversarialFound),
    }
}

/// Deterministic, roughly even covering of the unit sphere.
///
/// One dimension enumerates `±1`; two dimensions use equally spaced angles;
/// three use a Fibonacci spiral; higher dimensions map a Kronecker
/// low-discrepancy sequence through the inverse normal CDF and normalize.
pub fn sphere_directions(dim: usize, n: usize) -> Result<Vec<Direction>, VerifyError> {
    if n < 2 {
        return Err(VerifyError::TooFewDirections { needed: 2, got: n });
    }
    let mut out = Vec::with_capacity(n);
    match dim {
        0 => {
            return Err(VerifyError::Distance(DistanceError::ZeroDirection));
        }
        1 => {
            out.push(Direction::from_unit(vec![1.0])?);
            out.push(Direction::from_unit(vec![-1.0])?);
        }
        2 => {
            for i in 0..n {
                let angle = std::f64::consts::TAU * i as f64 / n as f64;
                out.push(Direction::from_unit(vec![angle.cos(), angle.sin()])?);
            }
        }
        3 => {
            // Fibonacci spiral: even z slices, golden-angle longitudes.
            let golden = (1.0 + 5f64.sqrt()) / 2.0;
            for i in 0..n {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let radius = (1.0 - z * z).max(0.0).sqrt();
                let angle = std::f64::consts::TAU * i as f64 / golden;
                out.push(Direction::normalize(vec![
                    radius * angle.cos(),
                    radius * angle.sin(),
                    z,
                ])?);
            }
        }
        _ => {
            // Kronecker sequence with the generalized golden ratio, pushed
            // through the inverse normal CDF so normalized points spread
            // evenly over the sphere.
            let alphas = kronecker_alphas(dim);
            for i in 0..n {
                let mut v = Vec::with_capacity(dim);
                for alpha in &alphas {
                    let t = (0.5 + alpha * (i as f64 + 1.0)).fract();
                    v.push(inverse_normal_cdf(t.clamp(1e-12, 1.0 - 1e-12)));
                }
                out.push(Direction::normalize(v)?);
            }
        }
    }
    Ok(out)
}

/// Reciprocal powers of the generalized golden ratio (the positive root of
/// `x^(d+1) = x + 1`).
fn kronecker_alphas(dim: usize) -> Vec<f64> {
    let exponent = 1.0 / (dim as f64 + 1.0);
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(exponent);
    }
    (1..=dim)
        .map(|j| (1.0 / phi.powi(j as i32)).fract())
        .collect()
}

/// Inverse standard normal CDF, rational approximation with relative error
/// below 1.2e-9.
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Central-difference gradient of the ray-length objective at `theta`.
///
/// `warm_start` is a known value near `g(theta)` used to warm every probe.
/// The step must clear the evaluator's error floor by a factor of ten, and
/// probes should run at fine absolute tolerance.
pub fn finite_difference_gradient<O: DistanceObjective + ?Sized>(
    objective: &O,
    theta: &Direction,
    warm_start: f64,
    h: f64,
) -> Result<Vec<f64>, VerifyError> {
    let floor = objective.tolerance() * 10.0;
    if h <= floor || h.is_nan() {
        return Err(VerifyError::StepTooSmall {
            h,
            tolerance: objective.tolerance(),
        });
    }
    let dim = objective.dim();
    let mut gradient = vec![0.0; dim];
    let mut failed = Vec::new();
    for i in 0..dim {
        let mut plus = theta.as_slice().to_vec();
        plus[i] += h;
        let mut minus = theta.as_slice().to_vec();
        minus[i] -= h;
        let g_plus = objective.eval_local(&plus, warm_start, None)?.value();
        let g_minus = objective.eval_local(&minus, warm_start, None)?.value();
        match (g_plus, g_minus) {
            (Some(p), Some(m)) => gradient[i] = (p - m) / (2.0 * h),
            _ => failed.push(i),
        }
    }
    if !failed.is_empty() {
        return Err(VerifyError::CoordinatesFailed {
            coordinates: failed,
        });
    }
    Ok(gradient)
}

/// Gap analysis of an attack trace against a reference optimum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceMetrics {
    /// `(cumulative queries, g - baseline)` per trace point.
    pub gap_series: Vec<(u64, f64)>,
    /// First cumulative query count at which the gap drops below each
    /// threshold.
    pub first_below: Vec<(f64, Option<u64>)>,
    /// The baseline the gaps are measured against: the ground-truth optimum
    /// when available, otherwise the trace's own final value.
    pub baseline: f64,
}

const GAP_THRESHOLDS: [f64; 2] = [1e-1, 1e-2];

/// Summarizes how quickly a run closed the gap to `ground_truth` (or to its
/// own final value when no reference is available).
pub fn convergence_trace_metrics(
    result: &AttackResult,
    ground_truth: Option<&GroundTruth>,
) -> Result<TraceMetrics, VerifyError> {
    if result.trace.is_empty() {
        return Err(VerifyError::EmptyTrace);
    }
    let baseline = match ground_truth {
        Some(gt) => gt.min_distortion,
        None => result.trace.last().unwrap().1,
    };
    let gap_series: Vec<(u64, f64)> = result
        .trace
        .iter()
        .map(|(q, g)| (*q, g - baseline))
        .collect();
    let first_below = GAP_THRESHOLDS
        .iter()
        .map(|threshold| {
            (
                *threshold,
                gap_series
                    .iter()
                    .find(|(_, gap)| *gap < *threshold)
                    .map(|(q, _)| *q),
            )
        })
        .collect();
    Ok(TraceMetrics {
        gap_series,
        first_below,
        baseline,
    })
}

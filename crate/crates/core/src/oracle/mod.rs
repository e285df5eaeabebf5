//! Hard-label classification oracles.
//!
//! An [`Oracle`] wraps a target model behind the narrowest possible
//! interface: feed it a point, get back a class index, and nothing else. A
//! monotone query counter records every classification so attack cost can be
//! reported exactly. Verification code that must not inflate attack cost
//! works on a [`fork`](Oracle::fork) of the handle, which shares the model
//! but owns a fresh counter.

mod external;
mod gbdt;
mod load;
mod mlp;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecmath;

pub use external::{serve_stdio, ExternalOracle};
pub use gbdt::{stump, GbdtModel, Tree, TreeNode};
pub use load::{
    load_model, parse_model, BoundsSide, BoundsSpec, LayerSpec, LoadError, ModelSpec, NodeSpec,
    TreeSpec,
};
pub use mlp::{Activation, MlpLayer, MlpModel};

/// Errors raised by oracle construction and classification.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension mismatch: oracle expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite feature at index {index}")]
    NonFinite { index: usize },
    #[error("empty feature vector")]
    EmptyVector,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("external oracle protocol error: {0}")]
    Protocol(String),
    #[error("external oracle i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A point in the classifier's input space. Entries are always finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    /// Builds a vector, rejecting empty input and non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self, OracleError> {
        if values.is_empty() {
            return Err(OracleError::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite { index });
        }
        Ok(FeatureVector(values))
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

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Class index in `{0, …, K-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub usize);

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-coordinate box constraints on the input domain.
///
/// Unbounded coordinates are stored as `±INFINITY`, which makes clamping a
/// plain `clamp` per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBounds {
    /// No constraints in any coordinate.
    pub fn unbounded(dim: usize) -> Self {
        DomainBounds {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// Per-coordinate box; requires `lower[i] <= upper[i]` wherever both are
    /// finite, and no NaN entries.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OracleError> {
        if lower.len() != upper.len() {
            return Err(OracleError::InvalidBounds(format!(
                "lower has {} coordinates, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() {
                return Err(OracleError::InvalidBounds(format!("NaN at coordinate {i}")));
            }
            if lo > hi {
                return Err(OracleError::InvalidBounds(format!(
                    "lower {lo} > upper {hi} at coordinate {i}"
                )));
            }
        }
        Ok(DomainBounds { lower, upper })
    }

    /// The same `[lo, hi]` interval in every coordinate.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self, OracleError> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|v| *v == f64::NEG_INFINITY)
            && self.upper.iter().all(|v| *v == f64::INFINITY)
    }

    /// Projects each coordinate into its interval. Idempotent; unbounded
    /// coordinates pass through unchanged.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// In-place variant of [`clamp`](Self::clamp).
    pub fn clamp_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Euclidean diameter of the box, when every coordinate is bounded.
    pub fn diameter(&self) -> Option<f64> {
        let mut sum = 0.0;
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !lo.is_finite() || !hi.is_finite() {
                return None;
            }
            sum += (hi - lo) * (hi - lo);
        }
        Some(sum.sqrt())
    }
}

/// Projects `x` into `bounds` coordinate-wise.
pub fn clamp_to_domain(x: &FeatureVector, bounds: &DomainBounds) -> FeatureVector {
    FeatureVector(bounds.clamp(x.as_slice()))
}

/// Threshold-on-radius model: class 1 iff `‖x‖² >= r²`. The boundary itself
/// belongs to class 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialModel {
    pub r_sq: f64,
    pub dim: usize,
}

impl RadialModel {
    pub fn new(r_sq: f64, dim: usize) -> Result<Self, OracleError> {
        if r_sq <= 0.0 || !r_sq.is_finite() {
            return Err(OracleError::InvalidModel(format!(
                "radial threshold r2 must be positive and finite, got {r_sq}"
            )));
        }
        if dim == 0 {
            return Err(OracleError::InvalidModel(
                "radial dimension must be >= 1".into(),
            ));
        }
        Ok(RadialModel { r_sq, dim })
    }

    fn predict(&self, x: &[f64]) -> Label {
        Label(usize::from(vecmath::norm_sq(x) >= self.r_sq))
    }
}

/// Half-space model: class 1 iff `w·x >= b`. Ties go to class 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self, OracleError> {
        if w.is_empty() {
            return Err(OracleError::InvalidModel(
                "linear weight vector is empty".into(),
            ));
        }
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(OracleError::InvalidModel(
                "non-finite linear coefficients".into(),
            ));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(OracleError::InvalidModel(
                "linear weight vector is all zeros".into(),
            ));
        }
        Ok(LinearModel { w, b })
    }

    fn predict(&self, x: &[f64]) -> Label {
        Label(usize::from(vecmath::dot(&self.w, x) >= self.b))
    }
}

/// The target model behind an oracle handle.
#[derive(Clone, Debug)]
pub enum Model {
    Radial(RadialModel),
    Linear(LinearModel),
    Mlp(MlpModel),
    Gbdt(GbdtModel),
    External(ExternalOracle),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Radial(m) => m.dim,
            Model::Linear(m) => m.w.len(),
            Model::Mlp(m) => m.input_dim(),
            Model::Gbdt(m) => m.dim(),
            Model::External(m) => m.dim(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::Radial(_) | Model::Linear(_) => 2,
            Model::Mlp(m) => m.num_classes(),
            Model::Gbdt(m) => m.num_classes(),
            Model::External(m) => m.num_classes(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Label, OracleError> {
        match self {
            Model::Radial(m) => Ok(m.predict(x)),
            Model::Linear(m) => Ok(m.predict(x)),
            Model::Mlp(m) => Ok(m.predict(x)),
            Model::Gbdt(m) => Ok(m.predict(x)),
            Model::External(m) => m.query(x),
        }
    }
}

/// A hard-label classifier plus a monotone query counter, the only channel
/// to the target model.
///
/// The counter increments by exactly one per successful classification and
/// never decrements. Classification is a pure function of its input for the
/// built-in model families; external oracles are trusted to behave the same
/// way. The counter is atomic so independent attacks may share a process,
/// but a single attack drives its handle strictly sequentially.
#[derive(Debug)]
pub struct Oracle {
    model: Model,
    bounds: DomainBounds,
    queries: AtomicU64,
}

impl Oracle {
    pub fn new(model: Model, bounds: DomainBounds) -> Result<Self, OracleError> {
        if bounds.dim() != model.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: model.dim(),
                got: bounds.dim(),
            });
        }
        Ok(Oracle {
            model,
            bounds,
            queries: AtomicU64::new(0),
        })
    }

    /// Convenience constructor with an unconstrained domain.
    pub fn unbounded(model: Model) -> Self {
        let dim = model.dim();
        Oracle {
            model,
            bounds: DomainBounds::unbounded(dim),
            queries: AtomicU64::new(0),
        }
    }

    /// A new handle over the same model with its query counter at zero.
    ///
    /// Used both for per-attack counter isolation and for verification
    /// probes, whose queries must never show up in reported attack cost.
    pub fn fork(&self) -> Oracle {
        Oracle {
            model: self.model.clone(),
            bounds: self.bounds.clone(),
            queries: AtomicU64::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    pub fn bounds(&self) -> &DomainBounds {
        &self.bounds
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Classifies a point, returning the hard label only.
    ///
    /// Callers are expected to clamp into the domain first; the oracle
    /// validates dimension and finiteness but does not project.
    pub fn classify(&self, x: &FeatureVector) -> Result<Label, OracleError> {
        self.classify_raw(x.as_slice())
    }

    /// Slice-level classification used on hot paths.
    pub fn classify_raw(&self, x: &[f64]) -> Result<Label, OracleError> {
        if x.len() != self.model.dim() {
            return Err(OracleError::DimensionMismatch {
                expected: self.model.dim(),
                got: x.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite { index });
        }
        let label = self.model.predict(x)?;
        self.queries.fetch_add(1, Ordering::Relaxed);
        Ok(label)
    }

    /// Number of successful classifications since construction or the last
    /// reset.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }
}

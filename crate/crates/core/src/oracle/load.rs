//! JSON model files and the built-in synthetic model fixtures.
//!
//! Every model file is a single JSON object with a top-level `"type"` tag:
//!
//! ```json
//! {"type": "radial", "r2": 0.4, "d": 2}
//! {"type": "linear", "w": [1.0, 0.0], "b": 0.5, "d": 2}
//! {"type": "mlp", "layers": [{"w": [[1,0],[0,1]], "b": [0,0], "act": "identity"}]}
//! {"type": "gbdt", "k": 2, "d": 2, "trees": [{"class": 0, "nodes": [
//!     {"feat": 0, "thresh": 0.6, "left": 1, "right": 2}, {"leaf": -1.0}, {"leaf": 0.5}]}]}
//! {"type": "external", "cmd": "./oracle", "args": ["--flag"]}
//! ```
//!
//! MLP weight matrices are row-major: one row per output unit. GBDT children
//! are node indices with node 0 as the root. Any model may carry an optional
//! `"bounds"` object whose `lower`/`upper` are either a scalar (broadcast to
//! every coordinate) or a full-length array; a missing side is unbounded.
//! External models learn their dimension and class count from the protocol
//! handshake, not the file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gbdt::{GbdtModel, Tree, TreeNode};
use super::mlp::{Activation, MlpLayer, MlpModel};
use super::{DomainBounds, ExternalOracle, LinearModel, Model, Oracle, OracleError, RadialModel};

/// Errors raised while loading model files.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON at line {line}, column {column}: {message}")]
    Json {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Invalid { path: String, source: OracleError },
}

/// Scalar-or-array bound side, broadcast over coordinates when scalar.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundsSide {
    Scalar(f64),
    PerCoordinate(Vec<f64>),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<BoundsSide>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<BoundsSide>,
}

impl BoundsSpec {
    fn resolve(&self, dim: usize) -> Result<DomainBounds, OracleError> {
        let expand = |side: &Option<BoundsSide>, fill: f64| -> Result<Vec<f64>, OracleError> {
            match side {
                None => Ok(vec![fill; dim]),
                Some(BoundsSide::Scalar(v)) => Ok(vec![*v; dim]),
                Some(BoundsSide::PerCoordinate(vs)) => {
                    if vs.len() != dim {
                        return Err(OracleError::InvalidBounds(format!(
                            "bounds have {} coordinates, model has {dim}",
                            vs.len()
                        )));
                    }
                    Ok(vs.clone())
                }
            }
        };
        DomainBounds::boxed(
            expand(&self.lower, f64::NEG_INFINITY)?,
            expand(&self.upper, f64::INFINITY)?,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerSpec {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeSpec {
    Split {
        feat: usize,
        thresh: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeSpec {
    pub class: usize,
    pub nodes: Vec<NodeSpec>,
}

/// On-disk model description. `ModelSpec::into_oracle` performs all
/// structural validation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Radial {
        #[serde(default = "default_r2")]
        r2: f64,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<BoundsSpec>,
    },
    Linear {
        w: Vec<f64>,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<BoundsSpec>,
    },
    Mlp {
        layers: Vec<LayerSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<BoundsSpec>,
    },
    Gbdt {
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        trees: Vec<TreeSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<BoundsSpec>,
    },
    External {
        cmd: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<BoundsSpec>,
    },
}

fn default_r2() -> f64 {
    0.4
}

impl ModelSpec {
    /// Builds a ready-to-query oracle (query counter at zero).
    pub fn into_oracle(self) -> Result<Oracle, OracleError> {
        let (model, bounds_spec) = match self {
            ModelSpec::Radial { r2, d, bounds } => {
                (Model::Radial(RadialModel::new(r2, d)?), bounds)
            }
            ModelSpec::Linear { w, b, d, bounds } => {
                if let Some(d) = d {
                    if d != w.len() {
                        return Err(OracleError::InvalidModel(format!(
                            "declared d = {d} but w has {} entries",
                            w.len()
                        )));
                    }
                }
                (Model::Linear(LinearModel::new(w, b)?), bounds)
            }
            ModelSpec::Mlp { layers, bounds } => {
                let mut built = Vec::with_capacity(layers.len());
                for (i, layer) in layers.into_iter().enumerate() {
                    let activation = Activation::parse(&layer.act)
                        .map_err(|e| OracleError::InvalidModel(format!("layer {i}: {e}")))?;
                    built.push(MlpLayer {
                        weights: layer.w,
                        bias: layer.b,
                        activation,
                    });
                }
                (Model::Mlp(MlpModel::new(built)?), bounds)
            }
            ModelSpec::Gbdt {
                k,
                d,
                trees,
                bounds,
            } => {
                let built: Vec<Tree> = trees
                    .into_iter()
                    .map(|t| Tree {
                        class: t.class,
                        nodes: t
                            .nodes
                            .into_iter()
                            .map(|n| match n {
                                NodeSpec::Split {
                                    feat,
                                    thresh,
                                    left,
                                    right,
                                } => TreeNode::Split {
                                    feature: feat,
                                    threshold: thresh,
                                    left,
                                    right,
                                },
                                NodeSpec::Leaf { leaf } => TreeNode::Leaf { value: leaf },
                            })
                            .collect(),
                    })
                    .collect();
                let dim = match d {
                    Some(d) => d,
                    // Infer from the highest feature index referenced.
                    None => built
                        .iter()
                        .flat_map(|t| t.nodes.iter())
                        .filter_map(|n| match n {
                            TreeNode::Split { feature, .. } => Some(feature + 1),
                            TreeNode::Leaf { .. } => None,
                        })
                        .max()
                        .unwrap_or(1),
                };
                (Model::Gbdt(GbdtModel::new(k, dim, built)?), bounds)
            }
            ModelSpec::External { cmd, args, bounds } => {
                (Model::External(ExternalOracle::spawn(&cmd, &args)?), bounds)
            }
        };
        let dim = model.dim();
        let bounds = match bounds_spec {
            Some(spec) => spec.resolve(dim)?,
            None => DomainBounds::unbounded(dim),
        };
        Oracle::new(model, bounds)
    }

    /// Radial fixture: class 1 iff `‖x‖² >= 0.4`.
    pub fn radial(d: usize) -> ModelSpec {
        ModelSpec::Radial {
            r2: 0.4,
            d,
            bounds: None,
        }
    }

    /// Half-space fixture: `w = e1`, `b = 0.5`.
    pub fn linear_halfspace(d: usize) -> ModelSpec {
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        ModelSpec::Linear {
            w,
            b: 0.5,
            d: Some(d),
            bounds: None,
        }
    }

    /// Three-class fixture in 2D: a single identity-activation layer whose
    /// scores are projections on three unit vectors 120° apart, so the plane
    /// splits into three sectors around the origin.
    pub fn three_sector() -> ModelSpec {
        let layers = (0..3)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                vec![angle.cos(), angle.sin()]
            })
            .collect::<Vec<_>>();
        ModelSpec::Mlp {
            layers: vec![LayerSpec {
                w: layers,
                b: vec![0.0; 3],
                act: "identity".into(),
            }],
            bounds: None,
        }
    }

    /// Two-stump GBDT fixture in 2D: class 1 exactly when both coordinates
    /// exceed 0.6 (leaf sums -2.0 / -0.5 / +1.0 for zero / one / two right
    /// branches).
    pub fn corner_stumps() -> ModelSpec {
        let stump = |feat: usize| TreeSpec {
            class: 0,
            nodes: vec![
                NodeSpec::Split {
                    feat,
                    thresh: 0.6,
                    left: 1,
                    right: 2,
                },
                NodeSpec::Leaf { leaf: -1.0 },
                NodeSpec::Leaf { leaf: 0.5 },
            ],
        };
        ModelSpec::Gbdt {
            k: 2,
            d: Some(2),
            trees: vec![stump(0), stump(1)],
            bounds: None,
        }
    }
}

/// Parses a model description from JSON text.
pub fn parse_model(text: &str) -> Result<ModelSpec, serde_json::Error> {
    serde_json::from_str(text)
}

/// Loads a model file and builds an oracle with its query counter at zero.
pub fn load_model(path: impl AsRef<Path>) -> Result<Oracle, LoadError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: display.clone(),
        source,
    })?;
    let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| LoadError::Json {
        path: display.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.into_oracle().map_err(|source| LoadError::Invalid {
        path: display,
        source,
    })
}

//! Feed-forward network evaluated from explicit weights; prediction is the
//! argmax of the final layer.

use super::{Label, OracleError};
use crate::vecmath;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn parse(name: &str) -> Result<Self, OracleError> {
        match name {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(OracleError::InvalidModel(format!(
                "unknown activation {other:?} (expected relu, tanh, or identity)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }
}

/// One dense layer: `act(W x + b)` with `W` stored row-major, one row per
/// output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<MlpLayer>,
}

impl MlpModel {
    /// Validates that consecutive layer dimensions are compatible and that
    /// all coefficients are finite.
    pub fn new(layers: Vec<MlpLayer>) -> Result<Self, OracleError> {
        if layers.is_empty() {
            return Err(OracleError::InvalidModel("mlp has no layers".into()));
        }
        let mut width = None;
        for (li, layer) in layers.iter().enumerate() {
            if layer.weights.is_empty() {
                return Err(OracleError::InvalidModel(format!("layer {li} has no rows")));
            }
            let in_dim = layer.weights[0].len();
            if in_dim == 0 {
                return Err(OracleError::InvalidModel(format!(
                    "layer {li} has zero input width"
                )));
            }
            for (ri, row) in layer.weights.iter().enumerate() {
                if row.len() != in_dim {
                    return Err(OracleError::InvalidModel(format!(
                        "layer {li} row {ri} has {} entries, expected {in_dim}",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(OracleError::InvalidModel(format!(
                        "layer {li} row {ri} has a non-finite weight"
                    )));
                }
            }
            if layer.bias.len() != layer.weights.len() {
                return Err(OracleError::InvalidModel(format!(
                    "layer {li} bias has {} entries, expected {}",
                    layer.bias.len(),
                    layer.weights.len()
                )));
            }
            if layer.bias.iter().any(|v| !v.is_finite()) {
                return Err(OracleError::InvalidModel(format!(
                    "layer {li} has a non-finite bias"
                )));
            }
            if let Some(prev_out) = width {
                if in_dim != prev_out {
                    return Err(OracleError::InvalidModel(format!(
                        "layer {li} expects input width {in_dim}, previous layer outputs {prev_out}"
                    )));
                }
            }
            width = Some(layer.weights.len());
        }
        Ok(MlpModel { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights[0].len()
    }

    /// Width of the final layer; one score per class.
    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().weights.len()
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut current = x.to_vec();
        for layer in &self.layers {
            current = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| layer.activation.apply(vecmath::dot(row, &current) + b))
                .collect();
        }
        current
    }

    /// Argmax of the output scores; ties resolve to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Label {
        let scores = self.scores(x);
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        Label(best)
    }
}

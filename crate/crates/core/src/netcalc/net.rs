use serde::{Deserialize, Serialize};

use super::sparse::SparseMatrix;
use crate::error::{check_len, Error, Result};

/// Largest |pre-activation| accepted by a ReCU layer during realization.
pub const RECU_ENVELOPE: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// σ₁(x) = max(0, x)
    Relu,
    /// σ₃(x) = max(0, x)³
    Recu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Recu => {
                let r = x.max(0.0);
                r * r * r
            }
            Activation::Linear => x,
        }
    }
}

/// One affine map followed by an activation: h ↦ σ(A h + b).
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: SparseMatrix,
    pub bias: Vec<f64>,
    pub act: Activation,
}

impl Layer {
    pub fn new(weights: SparseMatrix, bias: Vec<f64>, act: Activation) -> Self {
        assert_eq!(weights.rows(), bias.len(), "bias length must match weight rows");
        Self { weights, bias, act }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// A feed-forward network of ReLU, ReCU and linear layers. The last layer is
/// linear.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralNet {
    layers: Vec<Layer>,
}

impl NeuralNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidParameter("a network needs at least one layer".into()));
        };
        if last.act != Activation::Linear {
            return Err(Error::InvalidParameter("the output layer must be linear".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::InvalidParameter(format!(
                    "layer {} expects {} inputs but layer {k} produces {}",
                    k + 1,
                    pair[1].input_dim(),
                    pair[0].output_dim()
                )));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::InvalidParameter(format!("layer {k}: bias length mismatch")));
            }
            if !l.bias.iter().all(|v| v.is_finite()) || !l.weights.triplets().iter().all(|e| e.2.is_finite()) {
                return Err(Error::InvalidParameter(format!("layer {k}: non-finite parameter")));
            }
        }
        Ok(Self { layers })
    }

    /// Internal constructor for layer lists known to chain correctly.
    pub(crate) fn from_layers(layers: Vec<Layer>) -> Self {
        debug_assert!(!layers.is_empty());
        debug_assert_eq!(layers.last().map(|l| l.act), Some(Activation::Linear));
        Self { layers }
    }

    /// x ↦ A x + b.
    pub fn affine(weights: SparseMatrix, bias: Vec<f64>) -> Self {
        Self::from_layers(vec![Layer::new(weights, bias, Activation::Linear)])
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(SparseMatrix::identity(n), vec![0.0; n])
    }

    /// The constant map `R^input → {value}`.
    pub fn constant(input: usize, value: Vec<f64>) -> Self {
        Self::affine(SparseMatrix::zeros(value.len(), input), value)
    }

    pub fn zero(input: usize, output: usize) -> Self {
        Self::constant(input, vec![0.0; output])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Number of nonzero weights and biases.
    pub fn size(&self) -> usize {
        self.layers.iter().map(|l| l.weights.nnz() + l.bias.iter().filter(|v| **v != 0.0).count()).sum()
    }

    /// Largest layer dimension, input included.
    pub fn width(&self) -> usize {
        self.layers.iter().map(|l| l.output_dim()).fold(self.input_dim(), usize::max)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Activations of the hidden layers, in order.
    pub fn hidden_activations(&self) -> Vec<Activation> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.act).collect()
    }

    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.output_dim()];
            layer.weights.affine_apply(&h, &layer.bias, &mut z);
            if layer.act == Activation::Recu {
                if let Some(v) = z.iter().find(|v| v.is_nan() || v.abs() > RECU_ENVELOPE) {
                    return Err(Error::RecuEnvelope { layer: k, value: *v, envelope: RECU_ENVELOPE });
                }
            }
            if layer.act != Activation::Linear {
                for v in z.iter_mut() {
                    *v = layer.act.apply(*v);
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Realization of a scalar-output network.
    pub fn realize_scalar(&self, x: &[f64]) -> Result<f64> {
        check_len("network output", 1, self.output_dim())?;
        Ok(self.realize(x)?[0])
    }
}

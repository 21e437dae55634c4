use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2D;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn apply(self, z: &mut Tensor2D) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => {
                for r in 0..z.rows() {
                    softmax_in_place(z.row_mut(r));
                }
            }
        }
    }

    /// Multiply `grad` (dL/da) in place by da/dz, given the activation
    /// output `a`. Softmax has a dense Jacobian and is only supported on the
    /// output layer, where the loss fuses it.
    pub(crate) fn backprop(self, a: &Tensor2D, grad: &mut Tensor2D) -> Result<()> {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (g, &av) in grad.data_mut().iter_mut().zip(a.data()) {
                    if av <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &av) in grad.data_mut().iter_mut().zip(a.data()) {
                    *g *= av * (1.0 - av);
                }
            }
            Activation::Softmax => {
                return Err(Error::config(
                    "softmax is only supported on the output layer",
                ))
            }
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Fully connected layer `a = act(x · (W ⊙ M)ᵀ + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`
    pub(crate) weights: Tensor2D,
    pub(crate) bias: Vec<f64>,
    pub(crate) mask: Option<Tensor2D>,
    pub(crate) activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Tensor2D, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(format!(
                "bias of length {} for {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            mask: None,
            activation,
        })
    }

    /// Uniform Glorot initialization with zero bias.
    pub fn glorot(input: usize, output: usize, activation: Activation, rng: &mut Rng) -> Self {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weights: Tensor2D::new(output, input, data).expect("sized above"),
            bias: vec![0.0; output],
            mask: None,
            activation,
        }
    }

    pub fn with_mask(mut self, mask: Tensor2D) -> Result<Self> {
        self.weights.check_same_shape(&mask)?;
        if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::config("mask entries must be 0 or 1"));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Tensor2D {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor2D {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn mask(&self) -> Option<&Tensor2D> {
        self.mask.as_ref()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `W ⊙ M`, or `W` when unmasked.
    pub fn effective_weights(&self) -> std::borrow::Cow<'_, Tensor2D> {
        match &self.mask {
            Some(m) => std::borrow::Cow::Owned(self.weights.hadamard(m).expect("mask shape")),
            None => std::borrow::Cow::Borrowed(&self.weights),
        }
    }

    pub fn forward(&self, x: &Tensor2D) -> Result<Tensor2D> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "layer expects {} inputs, batch has {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut z = x.matmul_t(&self.effective_weights())?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        self.activation.apply(&mut z);
        Ok(z)
    }
}

use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use super::loss::{check_sample_weights, LossKind};
use super::snapshot::ParamSnapshot;
use super::tensor::Tensor2D;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Ordered stack of dense layers with a fixed training loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<DenseLayer>,
    loss: LossKind,
}

/// Gradient of one layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Tensor2D,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.bias).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.iter_values().all(|v| v == 0.0)
    }
}

/// Weighted loss together with its gradient.
#[derive(Clone, Debug)]
pub struct Backprop {
    pub loss: f64,
    pub gradients: Gradients,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, loss: LossKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers, loss })
    }

    /// Glorot-initialized MLP over `sizes = [input, hidden.., output]`.
    pub fn mlp(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        loss: LossKind,
        rng: &mut Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { hidden };
                DenseLayer::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Self::new(layers, loss)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, batch: &Tensor2D) -> Result<Tensor2D> {
        let mut a = self.layers[0].forward(batch)?;
        for layer in &self.layers[1..] {
            a = layer.forward(&a)?;
        }
        Ok(a)
    }

    fn forward_trace(&self, batch: &Tensor2D) -> Result<Vec<Tensor2D>> {
        let mut acts: Vec<Tensor2D> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let a = layer.forward(acts.last().unwrap_or(batch))?;
            acts.push(a);
        }
        Ok(acts)
    }

    fn check_output_pairing(&self) -> Result<()> {
        let act = self.layers[self.layers.len() - 1].activation();
        let ok = match self.loss {
            LossKind::WeightedCrossEntropy => act == Activation::Softmax,
            LossKind::BernoulliNll | LossKind::BinaryCrossEntropy => act == Activation::Sigmoid,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "{:?} loss requires a matching output activation, found {act:?}",
                self.loss
            )))
        }
    }

    fn check_targets(&self, batch: &Tensor2D, targets: &Tensor2D, weights: &[f64]) -> Result<()> {
        if targets.shape() != (batch.rows(), self.output_dim()) {
            return Err(Error::shape(format!(
                "targets {:?} do not match {} rows x {} outputs",
                targets.shape(),
                batch.rows(),
                self.output_dim()
            )));
        }
        check_sample_weights(weights, batch.rows())
    }

    fn weighted_loss(&self, output: &Tensor2D, targets: &Tensor2D, weights: &[f64]) -> Result<f64> {
        let n = output.rows();
        if n == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for j in 0..n {
            let (l, _) = self.loss.sample_loss(output.row(j), targets.row(j));
            if !l.is_finite() {
                return Err(Error::Numeric {
                    sample: j,
                    detail: format!("loss {l}"),
                });
            }
            total += weights[j] * l;
        }
        Ok(total / n as f64)
    }

    /// `(1/N) Σ_j α_j ℓ(f(x_j), t_j)`.
    pub fn loss(
        &self,
        batch: &Tensor2D,
        targets: &Tensor2D,
        sample_weights: &[f64],
    ) -> Result<f64> {
        self.check_output_pairing()?;
        self.check_targets(batch, targets, sample_weights)?;
        let out = self.forward(batch)?;
        self.weighted_loss(&out, targets, sample_weights)
    }

    /// Exact gradient of [`Network::loss`]. Masked weight entries receive a
    /// zero gradient.
    pub fn backward(
        &self,
        batch: &Tensor2D,
        targets: &Tensor2D,
        sample_weights: &[f64],
    ) -> Result<Backprop> {
        self.check_output_pairing()?;
        self.check_targets(batch, targets, sample_weights)?;
        let acts = self.forward_trace(batch)?;
        let output = acts.last().expect("non-empty network");
        let loss = self.weighted_loss(output, targets, sample_weights)?;

        let n = batch.rows().max(1) as f64;
        let scale = self.loss.delta_scale(self.output_dim());
        let mut delta = Tensor2D::zeros(output.rows(), output.cols());
        for j in 0..output.rows() {
            let w = sample_weights[j] * scale / n;
            let (o, t) = (output.row(j), targets.row(j));
            for (d, (p, y)) in delta.row_mut(j).iter_mut().zip(o.iter().zip(t)) {
                *d = w * (p - y);
            }
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = if i == 0 { batch } else { &acts[i - 1] };
            let mut gw = delta.t_matmul(input)?;
            if let Some(mask) = layer.mask() {
                gw = gw.hadamard(mask)?;
            }
            let gb = delta.column_sums();
            if i > 0 {
                let mut upstream = delta.matmul(&layer.effective_weights())?;
                self.layers[i - 1]
                    .activation()
                    .backprop(&acts[i - 1], &mut upstream)?;
                delta = upstream;
            }
            grads.push(LayerGradient {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Ok(Backprop {
            loss,
            gradients: Gradients { layers: grads },
        })
    }

    /// `p ← p − lr · grad`. Masks are left untouched.
    pub fn sgd_step(&mut self, gradients: &Gradients, lr: f64) -> Result<()> {
        if gradients.layers.len() != self.layers.len() {
            return Err(Error::shape("gradient layer count mismatch"));
        }
        for (layer, g) in self.layers.iter_mut().zip(&gradients.layers) {
            layer.weights.check_same_shape(&g.weights)?;
            if g.bias.len() != layer.bias.len() {
                return Err(Error::shape("bias gradient length mismatch"));
            }
        }
        if lr == 0.0 {
            return Ok(());
        }
        for (layer, g) in self.layers.iter_mut().zip(&gradients.layers) {
            for (p, d) in layer.weights.data_mut().iter_mut().zip(g.weights.data()) {
                *p -= lr * d;
            }
            for (p, d) in layer.bias.iter_mut().zip(&g.bias) {
                *p -= lr * d;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> ParamSnapshot {
        let shapes = self
            .layers
            .iter()
            .map(|l| (l.output_dim(), l.input_dim()))
            .collect();
        let mut values = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            values.extend_from_slice(l.weights.data());
            values.extend_from_slice(&l.bias);
        }
        ParamSnapshot::new(shapes, values).expect("consistent by construction")
    }

    pub fn load_snapshot(&mut self, snapshot: &ParamSnapshot) -> Result<()> {
        let ours: Vec<_> = self
            .layers
            .iter()
            .map(|l| (l.output_dim(), l.input_dim()))
            .collect();
        if ours != snapshot.shapes() {
            return Err(Error::shape(format!(
                "snapshot shapes {:?} do not match network {:?}",
                snapshot.shapes(),
                ours
            )));
        }
        let mut values = snapshot.values();
        for l in &mut self.layers {
            let (w, rest) = values.split_at(l.weights.len());
            l.weights.data_mut().copy_from_slice(w);
            let (b, rest) = rest.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            values = rest;
        }
        Ok(())
    }
}

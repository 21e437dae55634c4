//! Masked autoencoder for distribution estimation.
//!
//! Each hidden unit `k` carries a label `m(k) ∈ [1, D−1]`. An input→hidden
//! connection `(k, d)` exists iff `m(k) ≥ order(d)`, hidden→hidden iff
//! `m_l(k) ≥ m_{l−1}(k')`, and hidden→output iff `order(d) > m(k)`. Output `d`
//! can then only see inputs strictly earlier in the ordering, so the sigmoid
//! outputs are the conditionals `P(x_d = 1 | x_<d)`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    train_epoch, Activation, DenseLayer, LossKind, Network, ParamSnapshot, SgdConfig, Tensor2D,
    WordReader, PROB_FLOOR,
};
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    /// `ordering[d]` is the 1-based position of input `d`.
    ordering: Vec<usize>,
    hidden_labels: Vec<Vec<usize>>,
    /// One `out × in` mask per layer, input layer first.
    masks: Vec<Tensor2D>,
}

/// Masks for a `input_dim`-dimensional MADE in natural order, hidden labels
/// drawn uniformly from `[1, input_dim − 1]`.
pub fn build_masks(input_dim: usize, hidden_sizes: &[usize], seed: u64) -> Result<MaskSet> {
    if input_dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "MADE needs at least 2 inputs, got {input_dim}"
        )));
    }
    if let Some(pos) = hidden_sizes.iter().position(|&h| h == 0) {
        return Err(Error::InvalidDimension(format!(
            "hidden layer {pos} is empty"
        )));
    }
    let mut rng = rng::stream(seed, rng::streams::MASK, 0);
    let hidden_labels = hidden_sizes
        .iter()
        .map(|&h| (0..h).map(|_| rng.random_range(1..input_dim)).collect())
        .collect();
    MaskSet::from_labels((1..=input_dim).collect(), hidden_labels)
}

impl MaskSet {
    pub fn from_labels(ordering: Vec<usize>, hidden_labels: Vec<Vec<usize>>) -> Result<Self> {
        let d = ordering.len();
        if d < 2 {
            return Err(Error::InvalidDimension(format!(
                "MADE needs at least 2 inputs, got {d}"
            )));
        }
        let mut seen = vec![false; d];
        for &o in &ordering {
            if o == 0 || o > d || std::mem::replace(&mut seen[o - 1], true) {
                return Err(Error::config(format!(
                    "{ordering:?} is not a permutation of 1..={d}"
                )));
            }
        }
        for (l, labels) in hidden_labels.iter().enumerate() {
            if labels.is_empty() {
                return Err(Error::InvalidDimension(format!(
                    "hidden layer {l} is empty"
                )));
            }
            if let Some(&m) = labels.iter().find(|&&m| m < 1 || m >= d) {
                return Err(Error::config(format!(
                    "hidden label {m} outside [1, {}]",
                    d - 1
                )));
            }
        }

        let connect = |outs: &[usize], ins: &[usize], allowed: fn(usize, usize) -> bool| {
            let mut m = Tensor2D::zeros(outs.len(), ins.len());
            for (k, &o) in outs.iter().enumerate() {
                for (j, &i) in ins.iter().enumerate() {
                    if allowed(o, i) {
                        m.set(k, j, 1.0);
                    }
                }
            }
            m
        };
        let mut masks = Vec::with_capacity(hidden_labels.len() + 1);
        let mut prev: &[usize] = &ordering;
        for labels in &hidden_labels {
            masks.push(connect(labels, prev, |m, p| m >= p));
            prev = labels;
        }
        masks.push(connect(&ordering, prev, |o, m| o > m));
        Ok(Self {
            ordering,
            hidden_labels,
            masks,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.ordering.len()
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn hidden_labels(&self) -> &[Vec<usize>] {
        &self.hidden_labels
    }

    pub fn masks(&self) -> &[Tensor2D] {
        &self.masks
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden_labels.iter().map(Vec::len).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadeModel {
    net: Network,
    masks: MaskSet,
}

fn check_unit_interval(x: &Tensor2D) -> Result<()> {
    if let Some(v) = x.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::config(format!(
            "MADE inputs must lie in [0,1], found {v}"
        )));
    }
    Ok(())
}

impl MadeModel {
    /// ReLU hidden layers, sigmoid outputs, Glorot-initialized from `init`.
    pub fn new(
        input_dim: usize,
        hidden_sizes: &[usize],
        mask_seed: u64,
        init: &mut Rng,
    ) -> Result<Self> {
        let masks = build_masks(input_dim, hidden_sizes, mask_seed)?;
        Self::with_masks(masks, init)
    }

    pub fn with_masks(masks: MaskSet, init: &mut Rng) -> Result<Self> {
        let mut sizes = vec![masks.input_dim()];
        sizes.extend(masks.hidden_sizes());
        sizes.push(masks.input_dim());
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .zip(masks.masks())
            .enumerate()
            .map(|(i, (w, m))| {
                let act = if i == last {
                    Activation::Sigmoid
                } else {
                    Activation::Relu
                };
                DenseLayer::glorot(w[0], w[1], act, init).with_mask(m.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(layers, LossKind::BernoulliNll)?;
        Ok(Self { net, masks })
    }

    pub fn input_dim(&self) -> usize {
        self.masks.input_dim()
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn mask_set(&self) -> &MaskSet {
        &self.masks
    }

    pub fn snapshot(&self) -> ParamSnapshot {
        self.net.snapshot()
    }

    pub fn load_snapshot(&mut self, s: &ParamSnapshot) -> Result<()> {
        self.net.load_snapshot(s)
    }

    /// `p̂_d = P(x_d = 1 | x_<d)` for every row.
    pub fn conditionals(&self, x: &Tensor2D) -> Result<Tensor2D> {
        check_unit_interval(x)?;
        self.net.forward(x)
    }

    /// Probability assigned to each observed value:
    /// `u_d = x_d p̂_d + (1 − x_d)(1 − p̂_d)`, kept inside `(0, 1)`.
    pub fn forward(&self, x: &Tensor2D) -> Result<Tensor2D> {
        let p = self.conditionals(x)?;
        let mut u = p;
        for (u, &xv) in u.data_mut().iter_mut().zip(x.data()) {
            let v = xv * *u + (1.0 - xv) * (1.0 - *u);
            *u = v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        }
        Ok(u)
    }

    /// `−Σ_d ln u_d` per row.
    pub fn per_sample_nll(&self, x: &Tensor2D) -> Result<Vec<f64>> {
        let u = self.forward(x)?;
        Ok(u.iter_rows()
            .map(|r| -r.iter().map(|v| v.ln()).sum::<f64>())
            .collect())
    }

    /// Mean over rows of `−Σ_d ln u_d`.
    pub fn nll(&self, x: &Tensor2D) -> Result<f64> {
        let per = self.per_sample_nll(x)?;
        Ok(if per.is_empty() {
            0.0
        } else {
            per.iter().sum::<f64>() / per.len() as f64
        })
    }

    /// Training objective: summed Bernoulli cross-entropy against the
    /// (possibly continuous) inputs, averaged over rows. Equals
    /// [`MadeModel::nll`] on binary data.
    pub fn training_loss(&self, x: &Tensor2D) -> Result<f64> {
        check_unit_interval(x)?;
        self.net.loss(x, x, &vec![1.0; x.rows()])
    }

    pub fn train_epoch(&mut self, x: &Tensor2D, sgd: &SgdConfig, rng: &mut Rng) -> Result<f64> {
        check_unit_interval(x)?;
        train_epoch(&mut self.net, x, x, &vec![1.0; x.rows()], sgd, rng)
    }

    /// Network snapshot preceded by the mask labels, so a saved model can be
    /// rebuilt bit-exactly. All fields are little-endian `u64` words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut put = |v: u64| out.extend_from_slice(&v.to_le_bytes());
        put(MADE_MAGIC);
        put(self.input_dim() as u64);
        for &o in self.masks.ordering() {
            put(o as u64);
        }
        put(self.masks.hidden_labels.len() as u64);
        for labels in &self.masks.hidden_labels {
            put(labels.len() as u64);
            for &m in labels {
                put(m as u64);
            }
        }
        out.extend(self.net.snapshot().to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = WordReader { bytes, offset: 0 };
        if r.u64()? != MADE_MAGIC {
            return Err(Error::Parse {
                offset: 0,
                message: "not a serialized MADE model".into(),
            });
        }
        let d = r.u64()? as usize;
        let bound = bytes.len() / 8;
        if d > bound {
            return Err(Error::Parse {
                offset: 8,
                message: format!("input dim {d} exceeds payload"),
            });
        }
        let ordering = (0..d)
            .map(|_| r.u64().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let layers = r.u64()? as usize;
        if layers > bound {
            return Err(Error::Parse {
                offset: r.offset - 8,
                message: format!("hidden layer count {layers} exceeds payload"),
            });
        }
        let mut hidden = Vec::with_capacity(layers);
        for _ in 0..layers {
            let h = r.u64()? as usize;
            if h > bound {
                return Err(Error::Parse {
                    offset: r.offset - 8,
                    message: format!("hidden size {h} exceeds payload"),
                });
            }
            hidden.push(
                (0..h)
                    .map(|_| r.u64().map(|v| v as usize))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let snapshot = ParamSnapshot::from_bytes(&bytes[r.offset..])?;
        let masks = MaskSet::from_labels(ordering, hidden)?;
        let mut model = Self::with_masks(masks, &mut rng::stream(0, "unused", 0))?;
        model.load_snapshot(&snapshot)?;
        Ok(model)
    }
}

const MADE_MAGIC: u64 = u64::from_le_bytes(*b"MADE\0\0\0\x01");

/// Stop once the monitored loss has failed to improve on its best value for
/// `patience` consecutive observations.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_index: usize,
    seen: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        Ok(Self {
            patience,
            best: f64::INFINITY,
            best_index: 0,
            seen: 0,
        })
    }

    /// Record the next loss. Returns `true` when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best || self.seen == 0 {
            self.best = loss;
            self.best_index = self.seen;
        }
        self.seen += 1;
        self.stale() >= self.patience
    }

    pub fn improved_last(&self) -> bool {
        self.seen > 0 && self.best_index == self.seen - 1
    }

    /// Observations since the best one.
    pub fn stale(&self) -> usize {
        self.seen - 1 - self.best_index
    }

    /// 0-based index of the best observation.
    pub fn best_index(&self) -> usize {
        self.best_index
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadeTrainConfig {
    pub sgd: SgdConfig,
    pub max_iters: usize,
    pub patience: usize,
}

impl Default for MadeTrainConfig {
    fn default() -> Self {
        Self {
            sgd: SgdConfig::default(),
            max_iters: 500,
            patience: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MadeTraining {
    /// Parameters from the best validation epoch.
    pub model: MadeModel,
    /// Training loss after each epoch (epoch 1 first).
    pub train_curve: Vec<f64>,
    /// Validation loss after each epoch (epoch 1 first).
    pub valid_curve: Vec<f64>,
    /// Validation loss before any training.
    pub initial_valid: f64,
    /// Epoch of the returned parameters; 0 means the initial ones.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Fit `model` on `train`, validating after every epoch and keeping the best
/// parameters. Losses are [`MadeModel::training_loss`].
pub fn train_made(
    mut model: MadeModel,
    train: &Tensor2D,
    valid: &Tensor2D,
    cfg: &MadeTrainConfig,
    rng: &mut Rng,
) -> Result<MadeTraining> {
    if valid.rows() == 0 {
        return Err(Error::config("MADE validation set is empty"));
    }
    cfg.sgd.validate()?;
    let mut stopper = EarlyStopping::new(cfg.patience)?;
    let initial_valid = model.training_loss(valid)?;
    stopper.observe(initial_valid);
    let mut best = model.snapshot();
    let mut train_curve = Vec::new();
    let mut valid_curve = Vec::new();
    let mut stopped_early = false;
    for _ in 0..cfg.max_iters {
        model.train_epoch(train, &cfg.sgd, rng)?;
        train_curve.push(model.training_loss(train)?);
        let v = model.training_loss(valid)?;
        valid_curve.push(v);
        let stop = stopper.observe(v);
        if stopper.improved_last() {
            best = model.snapshot();
        }
        if stop {
            stopped_early = true;
            break;
        }
    }
    let epochs_run = train_curve.len();
    model.load_snapshot(&best)?;
    Ok(MadeTraining {
        model,
        train_curve,
        valid_curve,
        initial_valid,
        best_epoch: stopper.best_index(),
        epochs_run,
        stopped_early,
    })
}

/// Build a MADE whose conditionals are the constants `p` (all weights zero,
/// output bias `logit(p_d)`).
pub fn constant_made(p: &[f64], hidden_sizes: &[usize], mask_seed: u64) -> Result<MadeModel> {
    let mut model = MadeModel::new(
        p.len(),
        hidden_sizes,
        mask_seed,
        &mut rng::stream(0, "const", 0),
    )?;
    let n_layers = model.net.layers().len();
    for (i, layer) in model.net.layers_mut().iter_mut().enumerate() {
        layer.weights_mut().data_mut().fill(0.0);
        let bias = layer.bias_mut();
        if i + 1 == n_layers {
            for (b, &pd) in bias.iter_mut().zip(p) {
                if !(pd > 0.0 && pd < 1.0) {
                    return Err(Error::config(format!(
                        "constant probability {pd} not in (0,1)"
                    )));
                }
                *b = (pd / (1.0 - pd)).ln();
            }
        } else {
            bias.fill(0.0);
        }
    }
    Ok(model)
}

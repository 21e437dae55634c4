//! Per-sample importance weights from a probabilistic classifier.
//!
//! A binary classifier `h` is trained to tell "global" inputs (label 1) from
//! "local" ones (label 0) on a balanced dataset, so the class prior ratio is
//! one and `p/q ≈ P(l=1|·) / (1 − P(l=1|·))`. The FedDisk route feeds it the
//! MADE output vectors `u` of the same local samples under the local and the
//! global model; the ablation route feeds it raw local samples against an
//! equally sized pool drawn from all clients.

use std::io::{Read, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::made::MadeModel;
use crate::nn::{
    argmax_rows, one_hot, train_epoch, Activation, LossKind, Network, SgdConfig, Tensor2D,
};
use crate::rng::{self, streams};

/// Upper clamp on `P(l=1|u)` before forming the ratio.
pub const MAX_PROBABILITY: f64 = 1.0 - 1e-6;

/// Balanced two-class dataset: rows `0..n` are label 0, rows `n..2n` label 1,
/// and row `i` pairs with row `n + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoDataset {
    inputs: Tensor2D,
    labels: Vec<usize>,
}

impl PseudoDataset {
    pub fn from_parts(local: &Tensor2D, global: &Tensor2D) -> Result<Self> {
        if local.rows() == 0 || global.rows() == 0 {
            return Err(Error::config("discriminator needs samples of both labels"));
        }
        if local.rows() != global.rows() {
            return Err(Error::config(format!(
                "unbalanced pseudo dataset: {} local vs {} global rows",
                local.rows(),
                global.rows()
            )));
        }
        let inputs = Tensor2D::vstack(&[local, global])?;
        let labels = (0..2 * local.rows())
            .map(|i| usize::from(i >= local.rows()))
            .collect();
        Ok(Self { inputs, labels })
    }

    pub fn inputs(&self) -> &Tensor2D {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows per label.
    pub fn per_label(&self) -> usize {
        self.labels.len() / 2
    }

    /// Same rows in another order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(order),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// `u_local = ld(X_k)` labeled 0 stacked on `u_global = gd(X_k)` labeled 1.
pub fn build_pseudo_dataset(
    local: &MadeModel,
    global: &MadeModel,
    x: &Tensor2D,
) -> Result<PseudoDataset> {
    if local.input_dim() != global.input_dim() {
        return Err(Error::config(format!(
            "local MADE has {} inputs, global has {}",
            local.input_dim(),
            global.input_dim()
        )));
    }
    if x.cols() != local.input_dim() {
        return Err(Error::shape(format!(
            "samples have {} features, MADE expects {}",
            x.cols(),
            local.input_dim()
        )));
    }
    PseudoDataset::from_parts(&local.forward(x)?, &global.forward(x)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub hidden: usize,
    pub sgd: SgdConfig,
    pub max_epochs: usize,
    /// Stop once the loss improved by less than `plateau_tol` (relative)
    /// over the last `plateau_window` epochs.
    pub plateau_window: usize,
    pub plateau_tol: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            sgd: SgdConfig {
                lr: 0.01,
                batch_size: 8,
            },
            max_epochs: 500,
            plateau_window: 10,
            plateau_tol: 1e-4,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if self.hidden == 0 || self.plateau_window == 0 {
            return Err(Error::config(
                "discriminator hidden size and plateau window must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Discriminator {
    pub net: Network,
    /// Full-dataset loss after each epoch.
    pub loss_curve: Vec<f64>,
}

impl Discriminator {
    pub fn epochs(&self) -> usize {
        self.loss_curve.len()
    }

    /// `P(l = 1 | row)` for each row.
    pub fn class1_probabilities(&self, inputs: &Tensor2D) -> Result<Vec<f64>> {
        let probs = self.net.forward(inputs)?;
        Ok(probs.iter_rows().map(|r| r[1]).collect())
    }

    pub fn accuracy(&self, ds: &PseudoDataset) -> Result<f64> {
        let pred = argmax_rows(&self.net.forward(ds.inputs())?);
        let hits = pred.iter().zip(ds.labels()).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / ds.len().max(1) as f64)
    }
}

fn plateaued(curve: &[f64], window: usize, tol: f64) -> bool {
    if curve.len() <= window {
        return false;
    }
    let then = curve[curve.len() - 1 - window];
    let now = curve[curve.len() - 1];
    (then - now) / then.abs().max(f64::MIN_POSITIVE) < tol
}

/// One hidden ReLU layer, two softmax outputs, plain SGD until plateau.
pub fn train_discriminator(
    ds: &PseudoDataset,
    cfg: &DiscriminatorConfig,
    seed: u64,
) -> Result<Discriminator> {
    cfg.validate()?;
    if ds.per_label() == 0 || !ds.labels().contains(&0) || !ds.labels().contains(&1) {
        return Err(Error::config("discriminator needs samples of both labels"));
    }
    let mut init = rng::stream(seed, streams::INIT, 0);
    let mut shuffle = rng::stream(seed, streams::SHUFFLE, 0);
    let mut net = Network::mlp(
        &[ds.inputs().cols(), cfg.hidden, 2],
        Activation::Relu,
        Activation::Softmax,
        LossKind::WeightedCrossEntropy,
        &mut init,
    )?;
    let targets = one_hot(ds.labels(), 2)?;
    let ones = vec![1.0; ds.len()];
    let mut loss_curve = Vec::new();
    for _ in 0..cfg.max_epochs {
        train_epoch(
            &mut net,
            ds.inputs(),
            &targets,
            &ones,
            &cfg.sgd,
            &mut shuffle,
        )?;
        loss_curve.push(net.loss(ds.inputs(), &targets, &ones)?);
        if plateaued(&loss_curve, cfg.plateau_window, cfg.plateau_tol) {
            break;
        }
    }
    Ok(Discriminator { net, loss_curve })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `α = P / (1 − P)`
    #[default]
    Ratio,
    /// `α = P`
    RawProbability,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ClipBounds {
    fn default() -> Self {
        Self {
            lo: 0.01,
            hi: 100.0,
        }
    }
}

/// Normalized per-sample weights of one client, aligned with its training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    pub values: Vec<f64>,
    pub mode: WeightMode,
    pub clip: ClipBounds,
}

impl SampleWeights {
    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            mode: WeightMode::Ratio,
            clip: ClipBounds::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len().max(1) as f64)
            .sqrt()
    }
}

/// Map a class-1 probability to an (unclipped) weight.
pub fn probability_to_weight(p: f64, mode: WeightMode) -> f64 {
    let p = p.clamp(0.0, MAX_PROBABILITY);
    match mode {
        WeightMode::Ratio => p / (1.0 - p),
        WeightMode::RawProbability => p,
    }
}

/// Clamp into `[lo, hi]`, then rescale so the mean is one. The rescaled
/// values may leave `[lo, hi]`.
pub fn clip_normalize(values: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::config(format!("invalid clip bounds [{lo}, {hi}]")));
    }
    if values.is_empty() {
        return Err(Error::Normalize("no values".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Normalize("NaN weight".into()));
    }
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::Normalize("all weights are zero".into()));
    }
    let clamped: Vec<f64> = values.iter().map(|v| v.clamp(lo, hi)).collect();
    let scale = clamped.len() as f64 / clamped.iter().sum::<f64>();
    Ok(clamped.iter().map(|v| v * scale).collect())
}

fn weights_from_probabilities(
    p: &[f64],
    mode: WeightMode,
    clip: ClipBounds,
) -> Result<SampleWeights> {
    let raw: Vec<f64> = p.iter().map(|&p| probability_to_weight(p, mode)).collect();
    Ok(SampleWeights {
        values: clip_normalize(&raw, clip.lo, clip.hi)?,
        mode,
        clip,
    })
}

/// `α_j` for every row of `x`: `P(l=1 | ld(x_j))` turned into a weight.
pub fn estimate_weights(
    h: &Discriminator,
    local: &MadeModel,
    x: &Tensor2D,
    mode: WeightMode,
    clip: ClipBounds,
) -> Result<SampleWeights> {
    let u = local.forward(x)?;
    weights_from_probabilities(&h.class1_probabilities(&u)?, mode, clip)
}

/// Draw `n` rows without replacement from the union of all clients' data.
pub fn sample_pool(union: &Tensor2D, n: usize, seed: u64, client: usize) -> Result<Tensor2D> {
    if n > union.rows() {
        return Err(Error::config(format!(
            "cannot draw {n} pooled rows from {}",
            union.rows()
        )));
    }
    let mut rng = rng::stream(seed, streams::POOL, client as u64);
    let mut picked = index::sample(&mut rng, union.rows(), n).into_vec();
    picked.sort_unstable();
    Ok(union.select_rows(&picked))
}

/// Ablation: the discriminator sees raw local rows against an equally sized
/// global pool.
pub fn estimate_weights_raw(
    x: &Tensor2D,
    pooled_global: &Tensor2D,
    cfg: &DiscriminatorConfig,
    mode: WeightMode,
    clip: ClipBounds,
    seed: u64,
) -> Result<SampleWeights> {
    if pooled_global.rows() != x.rows() {
        return Err(Error::config(format!(
            "pooled sample has {} rows, client has {}",
            pooled_global.rows(),
            x.rows()
        )));
    }
    let ds = PseudoDataset::from_parts(x, pooled_global)?;
    let h = train_discriminator(&ds, cfg, seed)?;
    weights_from_probabilities(&h.class1_probabilities(x)?, mode, clip)
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightRow {
    client_id: usize,
    sample_index: usize,
    weight: f64,
}

/// CSV with header `client_id,sample_index,weight`.
pub fn write_weights_csv<W: Write>(out: W, clients: &[(usize, &SampleWeights)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for &(client_id, weights) in clients {
        for (sample_index, &weight) in weights.values.iter().enumerate() {
            w.serialize(WeightRow {
                client_id,
                sample_index,
                weight,
            })
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::io("<weights csv>", e))
}

/// Parse a weights CSV into per-client value vectors indexed by client id.
pub fn read_weights_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (line, row) in csv::Reader::from_reader(input)
        .deserialize::<WeightRow>()
        .enumerate()
    {
        let row = row.map_err(csv_error)?;
        if out.len() <= row.client_id {
            out.resize(row.client_id + 1, Vec::new());
        }
        let values = &mut out[row.client_id];
        if row.sample_index != values.len() {
            return Err(Error::config(format!(
                "weights row {} for client {} is out of order",
                line + 1,
                row.client_id
            )));
        }
        values.push(row.weight);
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte() as usize);
    Error::Parse {
        offset,
        message: e.to_string(),
    }
}

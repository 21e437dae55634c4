use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::tensor::Tensor2D;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Plain minibatch SGD settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            batch_size: 32,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be >= 0",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }
}

/// One pass over `inputs` in an order shuffled by `rng`. Returns the mean
/// minibatch loss.
pub fn train_epoch(
    net: &mut Network,
    inputs: &Tensor2D,
    targets: &Tensor2D,
    sample_weights: &[f64],
    cfg: &SgdConfig,
    rng: &mut Rng,
) -> Result<f64> {
    cfg.validate()?;
    let n = inputs.rows();
    if targets.rows() != n || sample_weights.len() != n {
        return Err(Error::shape(format!(
            "{n} inputs, {} targets, {} weights",
            targets.rows(),
            sample_weights.len()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0;
    for chunk in order.chunks(cfg.batch_size) {
        let x = inputs.select_rows(chunk);
        let t = targets.select_rows(chunk);
        let w: Vec<f64> = chunk.iter().map(|&i| sample_weights[i]).collect();
        let bp = net.backward(&x, &t, &w)?;
        net.sgd_step(&bp.gradients, cfg.lr)?;
        total += bp.loss;
        batches += 1;
    }
    Ok(if batches == 0 {
        0.0
    } else {
        total / batches as f64
    })
}

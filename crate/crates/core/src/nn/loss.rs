use serde::{Deserialize, Serialize};

use super::tensor::Tensor2D;
use crate::error::{Error, Result};

/// Floor applied to probabilities inside `log`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Softmax outputs against one-hot targets.
    WeightedCrossEntropy,
    /// Sigmoid outputs, summed Bernoulli negative log-likelihood per sample.
    BernoulliNll,
    /// Sigmoid outputs, Bernoulli cross-entropy averaged over output dims.
    BinaryCrossEntropy,
}

#[inline]
pub(crate) fn clamped_ln(p: f64, clamped: &mut bool) -> f64 {
    if p < PROB_FLOOR {
        *clamped = true;
        PROB_FLOOR.ln()
    } else {
        p.ln()
    }
}

impl LossKind {
    /// Unweighted loss of one sample and whether the floor was hit.
    pub(crate) fn sample_loss(self, out: &[f64], target: &[f64]) -> (f64, bool) {
        let mut clamped = false;
        let loss = match self {
            LossKind::WeightedCrossEntropy => out
                .iter()
                .zip(target)
                .filter(|(_, &t)| t != 0.0)
                .map(|(&p, &t)| -t * clamped_ln(p, &mut clamped))
                .sum(),
            LossKind::BernoulliNll | LossKind::BinaryCrossEntropy => {
                let s: f64 = out
                    .iter()
                    .zip(target)
                    .map(|(&p, &t)| {
                        let mut l = 0.0;
                        if t != 0.0 {
                            l -= t * clamped_ln(p, &mut clamped);
                        }
                        if t != 1.0 {
                            l -= (1.0 - t) * clamped_ln(1.0 - p, &mut clamped);
                        }
                        l
                    })
                    .sum();
                if self == LossKind::BinaryCrossEntropy {
                    s / out.len().max(1) as f64
                } else {
                    s
                }
            }
        };
        (loss, clamped)
    }

    /// Per-sample scale applied to `(output − target)` to get dℓ/dz.
    pub(crate) fn delta_scale(self, output_dim: usize) -> f64 {
        match self {
            LossKind::BinaryCrossEntropy => 1.0 / output_dim.max(1) as f64,
            _ => 1.0,
        }
    }
}

/// Result of a weighted cross-entropy evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSummary {
    pub value: f64,
    /// Samples whose true-label probability was raised to [`PROB_FLOOR`].
    pub clamped: Vec<usize>,
}

pub(crate) fn check_sample_weights(weights: &[f64], rows: usize) -> Result<()> {
    if weights.len() != rows {
        return Err(Error::shape(format!(
            "{} sample weights for {rows} samples",
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::config(format!(
            "sample weight {i} is {} (must be finite and >= 0)",
            weights[i]
        )));
    }
    Ok(())
}

/// `(1/N) Σ_j α_j · (−ln probs[j][label_j])`.
pub fn weighted_ce_loss(
    probs: &Tensor2D,
    labels: &[usize],
    sample_weights: &[f64],
) -> Result<LossSummary> {
    let n = probs.rows();
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    check_sample_weights(sample_weights, n)?;
    let mut total = 0.0;
    let mut clamped = Vec::new();
    for (j, row) in probs.iter_rows().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::config(format!("row {j} sums to {sum}, not 1")));
        }
        let label = labels[j];
        if label >= row.len() {
            return Err(Error::shape(format!(
                "label {label} out of range for {} classes",
                row.len()
            )));
        }
        let mut hit = false;
        let l = -clamped_ln(row[label], &mut hit);
        if hit {
            clamped.push(j);
        }
        total += sample_weights[j] * l;
    }
    let value = if n == 0 { 0.0 } else { total / n as f64 };
    Ok(LossSummary { value, clamped })
}

/// One-hot encode labels into an `N × classes` tensor.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor2D> {
    let mut t = Tensor2D::zeros(labels.len(), classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::shape(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        t.set(i, l, 1.0);
    }
    Ok(t)
}

//! Datasets: IDX ingestion, synthetic generators, partitioning with per-client
//! noise skew, and train/test splitting. Pixel values always stay in `[0, 1]`.

mod idx;
mod partition;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor2D;

pub use idx::{dataset_from_idx, encode_idx, load_idx, write_idx, IdxImages, IdxLabels};
pub use partition::{
    apply_noise_skew, noise_draws, noise_variance, partition_equal, split_train_test,
    PartitionPlan, Shard, ShardManifest,
};
pub use synth::{
    synth_blobs, synth_gaussian_mixture, BinEncoding, BlobSpec, GaussianComponent, MixtureSpec,
    ScalarSample,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    images: Tensor2D,
    labels: Vec<usize>,
    label_arity: usize,
}

impl LabeledDataset {
    pub fn new(images: Tensor2D, labels: Vec<usize>, label_arity: usize) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= label_arity) {
            return Err(Error::config(format!(
                "label {l} outside [0, {label_arity})"
            )));
        }
        if let Some(v) = images.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!("pixel value {v} outside [0,1]")));
        }
        Ok(Self {
            images,
            labels,
            label_arity,
        })
    }

    pub fn empty(dim: usize, label_arity: usize) -> Self {
        Self {
            images: Tensor2D::zeros(0, dim),
            labels: Vec::new(),
            label_arity,
        }
    }

    pub fn images(&self) -> &Tensor2D {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_arity(&self) -> usize {
        self.label_arity
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.images.cols()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_arity: self.label_arity,
        }
    }

    pub fn concat(parts: &[&LabeledDataset]) -> Result<Self> {
        let arity = parts.iter().map(|p| p.label_arity).max().unwrap_or(0);
        let images = Tensor2D::vstack(&parts.iter().map(|p| &p.images).collect::<Vec<_>>())?;
        let labels = parts
            .iter()
            .flat_map(|p| p.labels.iter().copied())
            .collect();
        Self::new(images, labels, arity)
    }

    /// Per-label counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_arity];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

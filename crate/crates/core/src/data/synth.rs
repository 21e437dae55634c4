//! Synthetic fixtures: scalar Gaussian mixtures with a one-hot bin encoding,
//! and labeled Gaussian blobs in the unit cube.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor2D;
use crate::rng::{self, streams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<GaussianComponent>,
}

impl MixtureSpec {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let spec = Self { components };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::config("mixture has no components"));
        }
        if self
            .components
            .iter()
            .any(|c| !(c.weight >= 0.0 && c.std >= 0.0 && c.mean.is_finite() && c.std.is_finite()))
        {
            return Err(Error::config(
                "mixture weights and deviations must be non-negative",
            ));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    /// Density at `x`. Zero-variance components contribute no density.
    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.std > 0.0)
            .map(|c| {
                let z = (x - c.mean) / c.std;
                c.weight * (-0.5 * z * z).exp() / (c.std * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum()
    }
}

/// Equal-width bins over `[lo, hi)`; values outside fall into the edge bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinEncoding {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for BinEncoding {
    fn default() -> Self {
        Self {
            lo: -4.0,
            hi: 6.0,
            bins: 16,
        }
    }
}

impl BinEncoding {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || !(self.hi > self.lo) {
            return Err(Error::config(
                "bin encoding needs hi > lo and at least 2 bins",
            ));
        }
        Ok(())
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let t = (x - self.lo) / (self.hi - self.lo) * self.bins as f64;
        if t.is_nan() || t < 0.0 {
            0
        } else {
            (t as usize).min(self.bins - 1)
        }
    }

    pub fn encode(&self, values: &[f64]) -> Tensor2D {
        let mut t = Tensor2D::zeros(values.len(), self.bins);
        for (i, &v) in values.iter().enumerate() {
            t.set(i, self.bin_of(v), 1.0);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSample {
    pub values: Vec<f64>,
    /// Index of the component each value was drawn from.
    pub components: Vec<usize>,
    /// True mixture density at each value.
    pub densities: Vec<f64>,
    /// One-hot encoded values, labeled by component.
    pub encoded: LabeledDataset,
}

pub fn synth_gaussian_mixture(
    spec: &MixtureSpec,
    encoding: &BinEncoding,
    n: usize,
    seed: u64,
) -> Result<ScalarSample> {
    spec.validate()?;
    encoding.validate()?;
    let mut rng = rng::stream(seed, streams::DATA, 0);
    let mut values = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = spec.components.len() - 1;
        for (i, c) in spec.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = spec.components[pick];
        let v = if c.std == 0.0 {
            c.mean
        } else {
            Normal::new(c.mean, c.std).expect("valid").sample(&mut rng)
        };
        values.push(v);
        components.push(pick);
    }
    let densities = values.iter().map(|&v| spec.pdf(v)).collect();
    let encoded = LabeledDataset::new(
        encoding.encode(&values),
        components.clone(),
        spec.components.len(),
    )?;
    Ok(ScalarSample {
        values,
        components,
        densities,
        encoded,
    })
}

/// Isotropic Gaussian class blobs in `[0,1]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub samples: usize,
    /// Per-coordinate standard deviation around each class center.
    pub spread: f64,
    /// Centers are drawn uniformly from `[center_lo, center_hi]^dim`.
    pub center_lo: f64,
    pub center_hi: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 64,
            samples: 3000,
            spread: 0.2,
            center_lo: 0.0,
            center_hi: 1.0,
        }
    }
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 {
            return Err(Error::config("blobs need at least one class and dimension"));
        }
        if !(self.spread >= 0.0)
            || !(0.0..=self.center_hi).contains(&self.center_lo)
            || self.center_hi > 1.0
        {
            return Err(Error::config(
                "blob centers must satisfy 0 <= lo <= hi <= 1 and spread >= 0",
            ));
        }
        Ok(())
    }
}

/// Samples are assigned to classes round-robin, then clipped into `[0,1]`.
pub fn synth_blobs(spec: &BlobSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = rng::stream(seed, streams::DATA, 1);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| rng.random_range(spec.center_lo..=spec.center_hi))
                .collect()
        })
        .collect();
    let normal = Normal::new(0.0, spec.spread).expect("validated");
    let mut data = Vec::with_capacity(spec.samples * spec.dim);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let c = i % spec.classes;
        for &m in &centers[c] {
            data.push((m + normal.sample(&mut rng)).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    LabeledDataset::new(
        Tensor2D::new(spec.samples, spec.dim, data)?,
        labels,
        spec.classes,
    )
}

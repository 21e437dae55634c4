use log::warn;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor2D;
use crate::rng::{self, streams};

/// How a pooled dataset is spread over clients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub clients: usize,
    /// Base variance `x`; client `k` receives variance `k'·x/100`.
    pub base_noise_variance: f64,
    pub seed: u64,
    pub split_fraction: f64,
}

impl PartitionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("at least one client is required"));
        }
        if !(self.base_noise_variance >= 0.0 && self.base_noise_variance.is_finite()) {
            return Err(Error::config(format!(
                "noise variance {} must be >= 0",
                self.base_noise_variance
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config(format!(
                "split fraction {} must lie in (0,1)",
                self.split_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shard {
    pub client: usize,
    /// Row indices into the source dataset.
    pub indices: Vec<usize>,
    pub data: LabeledDataset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub client: usize,
    pub indices: Vec<usize>,
    pub noise_variance: f64,
}

/// Shuffle and cut into `clients` disjoint shards whose sizes differ by at
/// most one.
pub fn partition_equal(ds: &LabeledDataset, clients: usize, seed: u64) -> Result<Vec<Shard>> {
    if clients == 0 {
        return Err(Error::config("at least one client is required"));
    }
    if clients > ds.len() {
        return Err(Error::config(format!(
            "{clients} clients for only {} samples",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng::stream(seed, streams::DATA, 0));
    let base = ds.len() / clients;
    let extra = ds.len() % clients;
    let mut start = 0;
    Ok((0..clients)
        .map(|client| {
            let size = base + usize::from(client < extra);
            let indices = order[start..start + size].to_vec();
            start += size;
            Shard {
                client,
                data: ds.select(&indices),
                indices,
            }
        })
        .collect())
}

/// Variance added to client `client` of `clients`: `k'·x/100` with
/// `k' = round(99·k/(K−1))`, so the range `[0, 0.99x]` is kept at any `K`.
pub fn noise_variance(client: usize, clients: usize, base: f64) -> f64 {
    let k = if clients <= 1 {
        0.0
    } else {
        (99.0 * client as f64 / (clients - 1) as f64).round()
    };
    k * base / 100.0
}

/// The zero-mean Gaussian draws (before clipping) used by
/// [`apply_noise_skew`].
pub fn noise_draws(len: usize, variance: f64, seed: u64, client: usize) -> Vec<f64> {
    if variance == 0.0 {
        return vec![0.0; len];
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
    let mut rng = rng::stream(seed, streams::NOISE, client as u64);
    (0..len).map(|_| normal.sample(&mut rng)).collect()
}

/// Add client-specific Gaussian noise and clip back into `[0, 1]`.
/// Returns the noised shard and the variance applied.
pub fn apply_noise_skew(
    shard: &LabeledDataset,
    client: usize,
    clients: usize,
    base: f64,
    seed: u64,
) -> Result<(LabeledDataset, f64)> {
    if !(base >= 0.0 && base.is_finite()) {
        return Err(Error::config(format!("noise variance {base} must be >= 0")));
    }
    let variance = noise_variance(client, clients, base);
    if variance == 0.0 {
        return Ok((shard.clone(), 0.0));
    }
    let noise = noise_draws(shard.images().len(), variance, seed, client);
    let data = shard
        .images()
        .data()
        .iter()
        .zip(&noise)
        .map(|(v, n)| (v + n).clamp(0.0, 1.0))
        .collect();
    let images = Tensor2D::new(shard.len(), shard.dim(), data)?;
    Ok((
        LabeledDataset::new(images, shard.labels().to_vec(), shard.label_arity())?,
        variance,
    ))
}

/// Split into train/test with `⌈fraction·N⌉` training rows. When every
/// class present has at least two samples the split is stratified by label
/// (largest-remainder allocation per class).
pub fn split_train_test(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction {fraction} must lie in (0,1)"
        )));
    }
    let n = ds.len();
    if n == 0 {
        return Err(Error::config("cannot split an empty shard"));
    }
    if n == 1 {
        warn!("shard of one sample: test split is empty");
        return Ok((ds.clone(), ds.select(&[])));
    }
    let n_train = ((fraction * n as f64) - 1e-9).ceil() as usize;
    let mut rng = rng::stream(seed, streams::SPLIT, 0);

    let counts = ds.class_counts();
    let stratify = counts.iter().all(|&c| c == 0 || c >= 2);
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    if stratify {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.label_arity()];
        for (i, &l) in ds.labels().iter().enumerate() {
            by_class[l].push(i);
        }
        let quotas: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 * n_train as f64 / n as f64)
            .collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut remaining = n_train - take.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &c in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            if take[c] < counts[c] {
                take[c] += 1;
                remaining -= 1;
            }
        }
        for (c, mut idx) in by_class.into_iter().enumerate() {
            idx.shuffle(&mut rng);
            test.extend_from_slice(&idx[take[c]..]);
            idx.truncate(take[c]);
            train.extend(idx);
        }
        train.sort_unstable();
        test.sort_unstable();
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        test.extend_from_slice(&order[n_train..]);
        order.truncate(n_train);
        train = order;
    }
    Ok((ds.select(&train), ds.select(&test)))
}

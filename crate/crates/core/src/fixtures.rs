//! The one-dimensional two-Gaussian density-ratio fixture: client `q` holds
//! `Normal(0,1)`, a second client holds `Normal(2,1)`, so the federation's
//! pooled law is `p = ½N(0,1) + ½N(2,1)` and `p/q = ½ + ½e^{2x−2}`.

use serde::{Deserialize, Serialize};

use crate::data::{
    synth_gaussian_mixture, BinEncoding, GaussianComponent, LabeledDataset, MixtureSpec,
};
use crate::density_ratio::{
    build_pseudo_dataset, clip_normalize, estimate_weights, probability_to_weight, sample_pool,
    train_discriminator, ClipBounds, DiscriminatorConfig, PseudoDataset, WeightMode,
};
use crate::error::Result;
use crate::fl::{
    run_federated_made, ClientState, FederatedMadeConfig, FederationState, LocalTrainConfig,
};
use crate::made::{train_made, MadeModel, MadeTrainConfig};
use crate::nn::{SgdConfig, Tensor2D};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRatioConfig {
    /// Training rows per client.
    pub samples: usize,
    /// Held-out local rows the weights are scored on.
    pub heldout: usize,
    pub encoding: BinEncoding,
    pub made_hidden: Vec<usize>,
    pub made: MadeTrainConfig,
    pub made_rounds: usize,
    pub discriminator: DiscriminatorConfig,
    pub clip: ClipBounds,
}

impl Default for GaussianRatioConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            heldout: 2000,
            encoding: BinEncoding::default(),
            made_hidden: vec![50],
            made: MadeTrainConfig {
                sgd: SgdConfig {
                    lr: 0.01,
                    batch_size: 8,
                },
                max_iters: 500,
                patience: 3,
            },
            made_rounds: 500,
            discriminator: DiscriminatorConfig::default(),
            clip: ClipBounds::default(),
        }
    }
}

pub fn normal(mean: f64) -> MixtureSpec {
    MixtureSpec::new(vec![GaussianComponent {
        weight: 1.0,
        mean,
        std: 1.0,
    }])
    .expect("valid component")
}

/// `p(x)/q(x)` for the fixture.
pub fn true_ratio(x: f64) -> f64 {
    0.5 + 0.5 * (2.0 * x - 2.0).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRatioOutcome {
    /// Held-out values drawn from `q`.
    pub values: Vec<f64>,
    pub true_ratio: Vec<f64>,
    /// Pipeline weights: discriminator over MADE outputs.
    pub weights: Vec<f64>,
    /// Ablation weights: discriminator over the encoded rows themselves.
    pub raw_weights: Vec<f64>,
    /// `exp(ln p̂_global − ln p̂_local)` from the two MADEs, clipped and
    /// normalized like the weights.
    pub made_ratio: Vec<f64>,
    pub discriminator_accuracy: f64,
    pub made_rounds: usize,
}

fn client(id: usize, data: &LabeledDataset, valid_rows: usize) -> ClientState {
    let n = data.len();
    let images = data.images();
    ClientState {
        id,
        train: data.clone(),
        test: data.select(&[]),
        made_train: images.select_rows(&(0..n - valid_rows).collect::<Vec<_>>()),
        made_valid: images.select_rows(&(n - valid_rows..n).collect::<Vec<_>>()),
        noise_variance: 0.0,
        local_made: None,
        weights: None,
    }
}

pub fn gaussian_ratio_experiment(
    cfg: &GaussianRatioConfig,
    seed: u64,
) -> Result<GaussianRatioOutcome> {
    let enc = &cfg.encoding;
    let draw = |mean: f64, n: usize, label: &str| {
        synth_gaussian_mixture(&normal(mean), enc, n, rng::derive_seed(seed, label, 0))
    };
    let local = draw(0.0, cfg.samples, "fixture-local")?;
    let other = draw(2.0, cfg.samples, "fixture-other")?;
    let heldout = draw(0.0, cfg.heldout, "fixture-heldout")?;

    let valid_rows = (cfg.samples as f64 * 0.15).ceil() as usize;
    let mut state = FederationState::new(vec![
        client(0, &local.encoded, valid_rows),
        client(1, &other.encoded, valid_rows),
    ])?;
    let dim = enc.bins;
    let mask_seed = rng::derive_seed(seed, "mask", 0);

    let local_model = MadeModel::new(
        dim,
        &cfg.made_hidden,
        mask_seed,
        &mut rng::stream(seed, "made-init-local", 0),
    )?;
    let c0 = &state.clients[0];
    let local_fit = train_made(
        local_model,
        &c0.made_train,
        &c0.made_valid,
        &cfg.made,
        &mut rng::stream(seed, "shuffle-made-local", 0),
    )?;

    let initial = MadeModel::new(
        dim,
        &cfg.made_hidden,
        mask_seed,
        &mut rng::stream(seed, "made-init-global", 0),
    )?;
    let fed_cfg = FederatedMadeConfig {
        local: LocalTrainConfig {
            sgd: cfg.made.sgd,
            local_iters: 1,
        },
        max_rounds: cfg.made_rounds,
        patience: cfg.made.patience,
        divergence_factor: 10.0,
    };
    let global = run_federated_made(&mut state, initial, &fed_cfg, seed)?;

    let x = local.encoded.images();
    let pseudo = build_pseudo_dataset(&local_fit.model, &global.model, x)?;
    let disc_seed = rng::derive_seed(seed, "discriminator", 0);
    let h = train_discriminator(&pseudo, &cfg.discriminator, disc_seed)?;
    let xh = heldout.encoded.images();
    let weights = estimate_weights(&h, &local_fit.model, xh, WeightMode::Ratio, cfg.clip)?;

    // ablation: raw encoded rows against a pooled sample, scored on held-out rows
    let raw_ds = PseudoDataset::from_parts(x, &pooled(&local.encoded, &other.encoded, seed)?)?;
    let h_raw = train_discriminator(&raw_ds, &cfg.discriminator, disc_seed)?;
    let raw: Vec<f64> = h_raw
        .class1_probabilities(xh)?
        .into_iter()
        .map(|p| probability_to_weight(p, WeightMode::Ratio))
        .collect();

    let lg = global.model.per_sample_nll(xh)?;
    let ll = local_fit.model.per_sample_nll(xh)?;
    let llr: Vec<f64> = ll.iter().zip(&lg).map(|(l, g)| (l - g).exp()).collect();

    Ok(GaussianRatioOutcome {
        true_ratio: heldout.values.iter().map(|&v| true_ratio(v)).collect(),
        values: heldout.values,
        weights: weights.values,
        raw_weights: clip_normalize(&raw, cfg.clip.lo, cfg.clip.hi)?,
        made_ratio: clip_normalize(&llr, cfg.clip.lo, cfg.clip.hi)?,
        discriminator_accuracy: h.accuracy(&pseudo)?,
        made_rounds: global.rounds_run,
    })
}

/// `N_k` rows drawn without replacement from the union of both clients.
fn pooled(a: &LabeledDataset, b: &LabeledDataset, seed: u64) -> Result<Tensor2D> {
    let union = Tensor2D::vstack(&[a.images(), b.images()])?;
    sample_pool(&union, a.len(), seed, 0)
}

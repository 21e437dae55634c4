use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DatasetSource, ExperimentConfig, SCHEMA_VERSION};
use crate::data::{
    apply_noise_skew, load_idx, partition_equal, split_train_test, synth_blobs, LabeledDataset,
    ShardManifest,
};
use crate::density_ratio::{
    build_pseudo_dataset, estimate_weights, estimate_weights_raw, sample_pool, train_discriminator,
    SampleWeights,
};
use crate::error::{Error, Result};
use crate::fl::{
    run_federated_classification, run_federated_made, ClientState, FederationState, MadeRound,
    RoundMetrics, Variant,
};
use crate::made::{train_made, MadeModel};
use crate::metrics::{entropy_bits, leakage_bound, CommLedger, CostSummary, LeakageInput};
use crate::nn::{argmax_rows, Tensor2D};
use crate::rng::{self, streams};

/// A partitioned, noised and split federation ready for either phase.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub state: FederationState,
    pub manifests: Vec<ShardManifest>,
    /// Hex SHA-256 over every client's train and test rows.
    pub signature: String,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    match &cfg.dataset {
        DatasetSource::Blobs(spec) => synth_blobs(spec, cfg.seed),
        DatasetSource::Idx {
            images,
            labels,
            limit,
        } => {
            let ds = load_idx(images, labels)?;
            Ok(match limit {
                Some(n) if *n < ds.len() => ds.select(&(0..*n).collect::<Vec<_>>()),
                _ => ds,
            })
        }
    }
}

fn hash_dataset(h: &mut Sha256, ds: &LabeledDataset) {
    h.update((ds.len() as u64).to_le_bytes());
    h.update((ds.dim() as u64).to_le_bytes());
    for v in ds.images().data() {
        h.update(v.to_le_bytes());
    }
    for &l in ds.labels() {
        h.update((l as u64).to_le_bytes());
    }
}

pub fn dataset_signature(clients: &[ClientState]) -> String {
    let mut h = Sha256::new();
    for c in clients {
        hash_dataset(&mut h, &c.train);
        hash_dataset(&mut h, &c.test);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Partition, apply the noise skew, split 85/15 and carve MADE validation
/// rows from each client's training split.
pub fn prepare_federation(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    prepare_from_dataset(cfg, &ds)
}

pub fn prepare_from_dataset(cfg: &ExperimentConfig, ds: &LabeledDataset) -> Result<Prepared> {
    let k = cfg.clients;
    let shards = partition_equal(ds, k, cfg.seed)?;
    let mut clients = Vec::with_capacity(k);
    let mut manifests = Vec::with_capacity(k);
    for shard in shards {
        let id = shard.client;
        let (noisy, variance) = apply_noise_skew(&shard.data, id, k, cfg.noise_variance, cfg.seed)?;
        let (train, test) = split_train_test(
            &noisy,
            cfg.split_fraction,
            rng::derive_seed(cfg.seed, streams::SPLIT, id as u64),
        )?;
        let (made_train, made_valid) = if train.len() >= 2 {
            let (a, b) = split_train_test(
                &train,
                1.0 - cfg.made_valid_fraction,
                rng::derive_seed(cfg.seed, "made-valid", id as u64),
            )?;
            (a.images().clone(), b.images().clone())
        } else {
            (train.images().clone(), Tensor2D::zeros(0, train.dim()))
        };
        manifests.push(ShardManifest {
            client: id,
            indices: shard.indices,
            noise_variance: variance,
        });
        clients.push(ClientState {
            id,
            train,
            test,
            made_train,
            made_valid,
            noise_variance: variance,
            local_made: None,
            weights: None,
        });
    }
    let signature = dataset_signature(&clients);
    Ok(Prepared {
        state: FederationState::new(clients)?,
        manifests,
        signature,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMadeSummary {
    pub client: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub initial_valid: f64,
    pub train_curve: Vec<f64>,
    pub valid_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSummary {
    pub client: usize,
    pub epochs: usize,
    pub final_loss: f64,
    /// Accuracy on its own pseudo-dataset.
    pub accuracy: f64,
    pub weight_mean: f64,
    pub weight_std: f64,
}

/// Everything phase 1 writes to `phase1.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase1Log {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub dataset_signature: String,
    pub made_rounds: Vec<MadeRound>,
    pub best_round: usize,
    pub rounds_run: usize,
    pub stopped_early: bool,
    pub local_made: Vec<LocalMadeSummary>,
    pub discriminators: Vec<DiscriminatorSummary>,
    pub ledger: CommLedger,
}

#[derive(Clone, Debug)]
pub struct Phase1Output {
    pub log: Phase1Log,
    pub global: MadeModel,
    /// Weights per client, in client order.
    pub weights: Vec<SampleWeights>,
}

fn mask_seed(cfg: &ExperimentConfig) -> u64 {
    rng::derive_seed(cfg.seed, streams::MASK, 0)
}

/// Local MADEs, the federated global MADE, then one discriminator per client.
/// Leaves the models and weights on `prep.state.clients`.
pub fn run_phase1(cfg: &ExperimentConfig, prep: &mut Prepared) -> Result<Phase1Output> {
    let dim = prep.state.clients[0].train.dim();
    let masks = mask_seed(cfg);
    let made_cfg = cfg.made_train_config();

    let mut local_made = Vec::with_capacity(prep.state.clients.len());
    for c in prep.state.clients.iter_mut() {
        let id = c.id as u64;
        let model = MadeModel::new(
            dim,
            &cfg.made.hidden,
            masks,
            &mut rng::stream(cfg.seed, "made-init-local", id),
        )?;
        let fit = train_made(
            model,
            &c.made_train,
            &c.made_valid,
            &made_cfg,
            &mut rng::stream(cfg.seed, "shuffle-made-local", id),
        )
        .map_err(|e| e.for_client(c.id))?;
        local_made.push(LocalMadeSummary {
            client: c.id,
            epochs_run: fit.epochs_run,
            best_epoch: fit.best_epoch,
            stopped_early: fit.stopped_early,
            initial_valid: fit.initial_valid,
            train_curve: fit.train_curve,
            valid_curve: fit.valid_curve,
        });
        c.local_made = Some(fit.model);
    }

    let initial = MadeModel::new(
        dim,
        &cfg.made.hidden,
        masks,
        &mut rng::stream(cfg.seed, "made-init-global", 0),
    )?;
    let global = run_federated_made(
        &mut prep.state,
        initial,
        &cfg.federated_made_config(),
        cfg.seed,
    )?;

    let mut discriminators = Vec::with_capacity(prep.state.clients.len());
    let mut weights = Vec::with_capacity(prep.state.clients.len());
    for c in prep.state.clients.iter_mut() {
        let local = c.local_made.as_ref().expect("local MADE trained above");
        let x = c.train.images();
        let w = (|| {
            let ds = build_pseudo_dataset(local, &global.model, x)?;
            let h = train_discriminator(
                &ds,
                &cfg.discriminator,
                rng::derive_seed(cfg.seed, streams::DISCRIMINATOR, c.id as u64),
            )?;
            let w = estimate_weights(&h, local, x, cfg.weight_mode, cfg.clip)?;
            discriminators.push(DiscriminatorSummary {
                client: c.id,
                epochs: h.epochs(),
                final_loss: h.loss_curve.last().copied().unwrap_or(f64::NAN),
                accuracy: h.accuracy(&ds)?,
                weight_mean: w.mean(),
                weight_std: w.std(),
            });
            Ok(w)
        })()
        .map_err(|e: Error| e.for_client(c.id))?;
        c.weights = Some(w.clone());
        weights.push(w);
    }

    Ok(Phase1Output {
        log: Phase1Log {
            schema_version: SCHEMA_VERSION,
            config: cfg.clone(),
            dataset_signature: prep.signature.clone(),
            made_rounds: global.rounds.clone(),
            best_round: global.best_round,
            rounds_run: global.rounds_run,
            stopped_early: global.stopped_early,
            local_made,
            discriminators,
            ledger: prep.state.ledger.clone(),
        },
        global: global.model,
        weights,
    })
}

/// Ablation weights: each client against a pool of `N_k` rows drawn from
/// the union of all clients' training data.
pub fn raw_weights(cfg: &ExperimentConfig, state: &FederationState) -> Result<Vec<SampleWeights>> {
    let parts: Vec<&Tensor2D> = state.clients.iter().map(|c| c.train.images()).collect();
    let union = Tensor2D::vstack(&parts)?;
    state
        .clients
        .iter()
        .map(|c| {
            let x = c.train.images();
            let pool = sample_pool(&union, x.rows(), cfg.seed, c.id)?;
            estimate_weights_raw(
                x,
                &pool,
                &cfg.discriminator,
                cfg.weight_mode,
                cfg.clip,
                rng::derive_seed(cfg.seed, streams::DISCRIMINATOR, c.id as u64),
            )
            .map_err(|e| e.for_client(c.id))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentile {
    pub percentile: u32,
    pub accuracy: f64,
}

/// Leakage bound of one client, in bits. `Ẑ_k` is taken as the final
/// model's predicted label on the client's training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientLeakage {
    pub client: usize,
    pub kappa: f64,
    pub entropy_bits: f64,
    pub bound_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub variant: Variant,
    pub config: ExperimentConfig,
    pub dataset_signature: String,
    pub rounds: Vec<RoundMetrics>,
    pub client_final_accuracy: Vec<f64>,
    pub accuracy_percentiles: Vec<Percentile>,
    /// Phase-1 MADE round log; empty for the baselines.
    pub made_rounds: Vec<MadeRound>,
    pub ledger: CommLedger,
    pub cost: CostSummary,
    pub leakage: Vec<ClientLeakage>,
}

impl RunReport {
    pub fn accuracy_curve(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.mean_accuracy).collect()
    }

    pub fn best_accuracy(&self) -> f64 {
        self.accuracy_curve()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Nearest-rank percentiles of per-client accuracies.
pub fn percentiles(values: &[f64], ps: &[u32]) -> Vec<Percentile> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ps.iter()
        .filter(|_| !sorted.is_empty())
        .map(|&p| {
            let rank = ((p as f64 / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
            Percentile {
                percentile: p,
                accuracy: sorted[rank.min(sorted.len()) - 1],
            }
        })
        .collect()
}

pub const PERCENTILES: [u32; 7] = [0, 10, 25, 50, 75, 90, 100];

/// Phase 2 for `variant`. Feddisk needs `phase1`; the ablation computes its
/// own raw-data weights; the baseline uses neither.
pub fn run_phase2(
    cfg: &ExperimentConfig,
    prep: &mut Prepared,
    variant: Variant,
    phase1: Option<(&[SampleWeights], &Phase1Log)>,
) -> Result<RunReport> {
    let mut made_rounds = Vec::new();
    prep.state.ledger = CommLedger::default();
    match variant {
        Variant::FedAvg => {
            for c in prep.state.clients.iter_mut() {
                c.weights = None;
            }
        }
        Variant::FedDisk => {
            let (weights, log) = phase1
                .ok_or_else(|| Error::config("feddisk needs phase-1 weights; run phase1 first"))?;
            if log.dataset_signature != prep.signature {
                return Err(Error::config(
                    "phase-1 output was produced from a different dataset",
                ));
            }
            if weights.len() != prep.state.clients.len() {
                return Err(Error::config(format!(
                    "phase-1 weights cover {} clients, config has {}",
                    weights.len(),
                    prep.state.clients.len()
                )));
            }
            for (c, w) in prep.state.clients.iter_mut().zip(weights) {
                c.weights = Some(w.clone());
            }
            made_rounds = log.made_rounds.clone();
            prep.state.ledger.s_made = log.ledger.s_made;
            prep.state.ledger.ecr_made = log.ledger.ecr_made;
            prep.state.ledger.made_round_bytes = log.ledger.made_round_bytes.clone();
        }
        Variant::FedDiskAb => {
            let weights = raw_weights(cfg, &prep.state)?;
            for (c, w) in prep.state.clients.iter_mut().zip(weights) {
                c.weights = Some(w);
            }
        }
    }

    let run =
        run_federated_classification(&mut prep.state, &cfg.classifier_config(), variant, cfg.seed)?;

    let kappas = prep.state.mixing_weights();
    let classes = run.model.output_dim();
    let mut leakage = Vec::with_capacity(kappas.len());
    for (c, &kappa) in prep.state.clients.iter().zip(&kappas) {
        let pred = argmax_rows(&run.model.forward(c.train.images())?);
        let mut dist = vec![0.0; classes];
        for p in pred {
            dist[p] += 1.0;
        }
        let n = c.train.len() as f64;
        dist.iter_mut().for_each(|v| *v /= n);
        let input = LeakageInput {
            kappa,
            distribution: dist,
        };
        leakage.push(ClientLeakage {
            client: c.id,
            kappa,
            entropy_bits: entropy_bits(&input.distribution)?,
            bound_bits: leakage_bound(&input)?,
        });
    }

    let ledger = prep.state.ledger.clone();
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        variant,
        config: cfg.clone(),
        dataset_signature: prep.signature.clone(),
        accuracy_percentiles: percentiles(&run.client_accuracy, &PERCENTILES),
        client_final_accuracy: run.client_accuracy,
        rounds: run.rounds,
        made_rounds,
        cost: CostSummary::from_ledger(variant.as_str(), &ledger),
        ledger,
        leakage,
    })
}

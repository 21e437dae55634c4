use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::aggregate::fedavg_aggregate;
use super::client::{client_stream, local_train_round, FederationState, LocalTrainConfig};
use crate::error::{Error, Result};
use crate::made::{EarlyStopping, MadeModel};
use crate::metrics::effective_rounds;
use crate::nn::{argmax_rows, one_hot, Activation, LossKind, Network, Tensor2D};
use crate::rng::{self, streams, Rng};

const MADE_PHASE: &str = "shuffle-made";
const CLS_PHASE: &str = "shuffle-cls";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederatedMadeConfig {
    pub local: LocalTrainConfig,
    /// Cap on exchange rounds.
    pub max_rounds: usize,
    pub patience: usize,
    /// Abort once validation NLL exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadeRound {
    pub round: usize,
    pub train_nll: f64,
    pub valid_nll: f64,
}

#[derive(Clone, Debug)]
pub struct FederatedMade {
    /// Global MADE at the best validation round.
    pub model: MadeModel,
    /// Round 0 is the initial broadcast model.
    pub rounds: Vec<MadeRound>,
    pub best_round: usize,
    pub rounds_run: usize,
    pub stopped_early: bool,
}

fn pooled_loss(model: &MadeModel, parts: &[&Tensor2D]) -> Result<f64> {
    let mut total = 0.0;
    let mut rows = 0;
    for part in parts {
        if part.rows() > 0 {
            total += model.training_loss(part)? * part.rows() as f64;
            rows += part.rows();
        }
    }
    Ok(total / rows.max(1) as f64)
}

/// Phase 1 exchange: broadcast, local NLL training, size-weighted
/// aggregation, repeated until the pooled validation NLL stops improving
/// for `patience` rounds or `max_rounds` is reached.
pub fn run_federated_made(
    state: &mut FederationState,
    initial: MadeModel,
    cfg: &FederatedMadeConfig,
    seed: u64,
) -> Result<FederatedMade> {
    if let Some(c) = state.clients.iter().find(|c| c.made_valid.rows() == 0) {
        return Err(Error::config(format!(
            "client {} has no MADE validation rows",
            c.id
        )));
    }
    let sizes = state.sizes();
    let template = initial.net().clone();
    let mut model = initial;
    let mut global = model.snapshot();
    let mut rngs: Vec<Rng> = state
        .clients
        .iter()
        .map(|c| client_stream(seed, MADE_PHASE, c.id))
        .collect();
    let train_parts: Vec<&Tensor2D> = state.clients.iter().map(|c| &c.made_train).collect();
    let valid_parts: Vec<&Tensor2D> = state.clients.iter().map(|c| &c.made_valid).collect();

    let initial_valid = pooled_loss(&model, &valid_parts)?;
    let mut rounds = vec![MadeRound {
        round: 0,
        train_nll: pooled_loss(&model, &train_parts)?,
        valid_nll: initial_valid,
    }];
    let mut stopper = EarlyStopping::new(cfg.patience)?;
    stopper.observe(initial_valid);
    let mut best = global.clone();
    let mut stopped_early = false;

    for round in 1..=cfg.max_rounds {
        let mut locals = Vec::with_capacity(state.clients.len());
        for (client, rng) in state.clients.iter().zip(rngs.iter_mut()) {
            let (params, _) = local_train_round(
                &template,
                &global,
                &client.made_train,
                &client.made_train,
                None,
                &cfg.local,
                rng,
            )
            .map_err(|e| e.for_client(client.id))?;
            locals.push(params);
        }
        global = fedavg_aggregate(&locals, &sizes)?;
        state.ledger.record_made_round(global.wire_words());
        state.round += 1;
        model.load_snapshot(&global)?;

        let valid_nll = pooled_loss(&model, &valid_parts)?;
        let train_nll = pooled_loss(&model, &train_parts)?;
        rounds.push(MadeRound {
            round,
            train_nll,
            valid_nll,
        });
        if !valid_nll.is_finite() || valid_nll > cfg.divergence_factor * initial_valid {
            return Err(Error::Diverged(format!(
                "global MADE validation NLL {valid_nll} at round {round} (initial {initial_valid})"
            )));
        }
        let stop = stopper.observe(valid_nll);
        if stopper.improved_last() {
            best = global.clone();
        }
        if stop {
            stopped_early = true;
            break;
        }
    }

    let rounds_run = rounds.len() - 1;
    model.load_snapshot(&best)?;
    state.ledger.s_made = best.param_count() as u64;
    state.ledger.ecr_made = rounds_run as u64;
    Ok(FederatedMade {
        model,
        rounds,
        best_round: stopper.best_index(),
        rounds_run,
        stopped_early,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "feddisk")]
    FedDisk,
    #[serde(rename = "feddisk-ab")]
    FedDiskAb,
    #[serde(rename = "fedavg")]
    FedAvg,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FedDisk => "feddisk",
            Variant::FedDiskAb => "feddisk-ab",
            Variant::FedAvg => "fedavg",
        }
    }

    pub fn uses_weights(self) -> bool {
        self != Variant::FedAvg
    }

    pub fn is_baseline(self) -> bool {
        self == Variant::FedAvg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feddisk" => Ok(Variant::FedDisk),
            "feddisk-ab" => Ok(Variant::FedDiskAb),
            "fedavg" => Ok(Variant::FedAvg),
            other => Err(Error::config(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub local: LocalTrainConfig,
    pub global_iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    /// Global-model test accuracy averaged over clients.
    pub mean_accuracy: f64,
    /// Pooled unweighted cross-entropy on all training rows.
    pub train_loss: f64,
    /// Pooled cross-entropy on all test rows.
    pub test_loss: f64,
}

#[derive(Clone, Debug)]
pub struct ClassificationRun {
    pub rounds: Vec<RoundMetrics>,
    /// Final global model accuracy on each client's test split.
    pub client_accuracy: Vec<f64>,
    pub model: Network,
}

impl ClassificationRun {
    pub fn accuracy_curve(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.mean_accuracy).collect()
    }
}

fn accuracy(net: &Network, x: &Tensor2D, labels: &[usize]) -> Result<Option<f64>> {
    if labels.is_empty() {
        return Ok(None);
    }
    let pred = argmax_rows(&net.forward(x)?);
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(Some(hits as f64 / labels.len() as f64))
}

/// The initial classifier every variant starts from for a given seed.
pub fn initial_classifier(
    input_dim: usize,
    classes: usize,
    hidden: &[usize],
    seed: u64,
) -> Result<Network> {
    let mut sizes = vec![input_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(classes);
    Network::mlp(
        &sizes,
        Activation::Relu,
        Activation::Softmax,
        LossKind::WeightedCrossEntropy,
        &mut rng::stream(seed, streams::INIT, 1),
    )
}

/// Phase 2: FedAvg over classifiers, each client minimizing its weighted
/// empirical risk (`α ≡ 1` for the baseline).
pub fn run_federated_classification(
    state: &mut FederationState,
    cfg: &ClassifierConfig,
    variant: Variant,
    seed: u64,
) -> Result<ClassificationRun> {
    let dim = state.clients[0].train.dim();
    let classes = state
        .clients
        .iter()
        .map(|c| c.train.label_arity().max(c.test.label_arity()))
        .max()
        .unwrap_or(0);
    if classes < 2 {
        return Err(Error::config("classification needs at least two classes"));
    }
    let mut weights: Vec<Option<&[f64]>> = Vec::with_capacity(state.clients.len());
    for c in &state.clients {
        if !variant.uses_weights() {
            weights.push(None);
            continue;
        }
        let w = c.weights.as_ref().ok_or_else(|| {
            Error::config(format!(
                "{variant} needs sample weights for client {}",
                c.id
            ))
        })?;
        if w.len() != c.train.len() {
            return Err(Error::config(format!(
                "client {} has {} weights for {} training rows",
                c.id,
                w.len(),
                c.train.len()
            )));
        }
        weights.push(Some(&w.values));
    }

    let template = initial_classifier(dim, classes, &cfg.hidden, seed)?;
    let mut global_net = template.clone();
    let mut global = template.snapshot();
    let sizes = state.sizes();
    let targets: Vec<Tensor2D> = state
        .clients
        .iter()
        .map(|c| one_hot(c.train.labels(), classes))
        .collect::<Result<_>>()?;
    let test_targets: Vec<Tensor2D> = state
        .clients
        .iter()
        .map(|c| one_hot(c.test.labels(), classes))
        .collect::<Result<_>>()?;
    let mut rngs: Vec<Rng> = state
        .clients
        .iter()
        .map(|c| client_stream(seed, CLS_PHASE, c.id))
        .collect();

    let mut rounds = Vec::with_capacity(cfg.global_iters);
    let mut client_accuracy = vec![0.0; state.clients.len()];
    for round in 1..=cfg.global_iters {
        let mut locals = Vec::with_capacity(state.clients.len());
        for (i, client) in state.clients.iter().enumerate() {
            let (params, _) = local_train_round(
                &template,
                &global,
                client.train.images(),
                &targets[i],
                weights[i],
                &cfg.local,
                &mut rngs[i],
            )
            .map_err(|e| e.for_client(client.id))?;
            locals.push(params);
        }
        global = fedavg_aggregate(&locals, &sizes)?;
        global_net.load_snapshot(&global)?;
        state.ledger.record_cls_round(global.wire_words());
        state.round += 1;

        let (mut train_total, mut train_rows) = (0.0, 0usize);
        let (mut test_total, mut test_rows) = (0.0, 0usize);
        let mut accs = Vec::with_capacity(state.clients.len());
        for (i, c) in state.clients.iter().enumerate() {
            let n = c.train.len();
            train_total +=
                global_net.loss(c.train.images(), &targets[i], &vec![1.0; n])? * n as f64;
            train_rows += n;
            let m = c.test.len();
            if m > 0 {
                test_total +=
                    global_net.loss(c.test.images(), &test_targets[i], &vec![1.0; m])? * m as f64;
                test_rows += m;
            }
            if let Some(a) = accuracy(&global_net, c.test.images(), c.test.labels())? {
                client_accuracy[i] = a;
                accs.push(a);
            }
        }
        rounds.push(RoundMetrics {
            round,
            mean_accuracy: accs.iter().sum::<f64>() / accs.len().max(1) as f64,
            train_loss: train_total / train_rows.max(1) as f64,
            test_loss: test_total / test_rows.max(1) as f64,
        });
    }

    let curve: Vec<f64> = rounds.iter().map(|r| r.mean_accuracy).collect();
    let best = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    state.ledger.s_cls = global.param_count() as u64;
    state.ledger.ecr_cls = effective_rounds(&curve, best).unwrap_or(0) as u64;
    Ok(ClassificationRun {
        rounds,
        client_accuracy,
        model: global_net,
    })
}

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::density_ratio::SampleWeights;
use crate::error::{Error, Result};
use crate::made::MadeModel;
use crate::metrics::CommLedger;
use crate::nn::{train_epoch, Network, ParamSnapshot, SgdConfig, Tensor2D};
use crate::rng::{self, Rng};

/// Shuffle stream of `client` within training `phase`.
pub fn client_stream(seed: u64, phase: &str, client: usize) -> Rng {
    rng::stream(seed, phase, client as u64)
}

#[derive(Clone, Debug)]
pub struct ClientState {
    pub id: usize,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Part of `train` the MADE models fit on.
    pub made_train: Tensor2D,
    /// Held-out part of `train` for MADE early stopping.
    pub made_valid: Tensor2D,
    pub noise_variance: f64,
    pub local_made: Option<MadeModel>,
    pub weights: Option<SampleWeights>,
}

impl ClientState {
    /// `N_k`: every sample the client holds.
    pub fn n_k(&self) -> usize {
        self.train.len() + self.test.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct FederationState {
    pub clients: Vec<ClientState>,
    pub round: usize,
    pub ledger: CommLedger,
}

impl FederationState {
    pub fn new(clients: Vec<ClientState>) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::config("federation has no clients"));
        }
        if let Some((i, c)) = clients.iter().enumerate().find(|(i, c)| c.id != *i) {
            return Err(Error::config(format!(
                "client at position {i} has id {}",
                c.id
            )));
        }
        if let Some(c) = clients.iter().find(|c| c.train.is_empty()) {
            return Err(Error::config(format!(
                "client {} has no training data",
                c.id
            )));
        }
        Ok(Self {
            clients,
            round: 0,
            ledger: CommLedger::default(),
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clients.iter().map(ClientState::n_k).collect()
    }

    /// `c_k = N_k / N`.
    pub fn mixing_weights(&self) -> Vec<f64> {
        let sizes = self.sizes();
        let total: usize = sizes.iter().sum();
        sizes.iter().map(|&n| n as f64 / total as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTrainConfig {
    pub sgd: SgdConfig,
    /// Local epochs per round.
    pub local_iters: usize,
}

/// Load `global` into a copy of `template` and run `local_iters` epochs of
/// SGD on the (optionally weighted) objective.
pub fn local_train_round(
    template: &Network,
    global: &ParamSnapshot,
    inputs: &Tensor2D,
    targets: &Tensor2D,
    sample_weights: Option<&[f64]>,
    cfg: &LocalTrainConfig,
    rng: &mut Rng,
) -> Result<(ParamSnapshot, Network)> {
    let mut net = template.clone();
    net.load_snapshot(global)?;
    if cfg.local_iters == 0 {
        return Ok((global.clone(), net));
    }
    let ones;
    let weights = match sample_weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; inputs.rows()];
            &ones
        }
    };
    for _ in 0..cfg.local_iters {
        train_epoch(&mut net, inputs, targets, weights, &cfg.sgd, rng)?;
    }
    Ok((net.snapshot(), net))
}

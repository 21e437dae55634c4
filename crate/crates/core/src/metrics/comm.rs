use serde::{Deserialize, Serialize};

/// Per-client communication record for one run. Sizes count parameters
/// (weights plus biases); each round a client uploads and downloads once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub s_made: u64,
    pub s_cls: u64,
    pub ecr_made: u64,
    pub ecr_cls: u64,
    /// Bytes moved per client in each MADE round (upload + download).
    #[serde(default)]
    pub made_round_bytes: Vec<u64>,
    /// Bytes moved per client in each classification round.
    #[serde(default)]
    pub cls_round_bytes: Vec<u64>,
}

impl CommLedger {
    pub fn record_made_round(&mut self, wire_words: usize) {
        self.made_round_bytes.push(2 * 8 * wire_words as u64);
    }

    pub fn record_cls_round(&mut self, wire_words: usize) {
        self.cls_round_bytes.push(2 * 8 * wire_words as u64);
    }

    pub fn total_bytes(&self) -> u64 {
        self.made_round_bytes
            .iter()
            .chain(&self.cls_round_bytes)
            .sum()
    }
}

/// `C = 2·S_cls·ECR`
pub fn baseline_cost(s_cls: u64, ecr: u64) -> u64 {
    2 * s_cls * ecr
}

/// `C = 2·(S_MADE·ECR_MADE + S_cls·ECR_cls)`
pub fn feddisk_cost(s_made: u64, ecr_made: u64, s_cls: u64, ecr_cls: u64) -> u64 {
    2 * (s_made * ecr_made + s_cls * ecr_cls)
}

/// Effective communication cost of a ledger. A ledger without MADE rounds
/// reduces to [`baseline_cost`].
pub fn comm_cost(ledger: &CommLedger) -> u64 {
    feddisk_cost(ledger.s_made, ledger.ecr_made, ledger.s_cls, ledger.ecr_cls)
}

/// Smallest 1-based round whose accuracy reaches `target`.
pub fn effective_rounds(acc_curve: &[f64], target: f64) -> Option<usize> {
    acc_curve.iter().position(|&a| a >= target).map(|i| i + 1)
}

/// Cost block written next to every run report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub variant: String,
    pub s_made: u64,
    pub s_cls: u64,
    pub ecr_made: u64,
    pub ecr_cls: u64,
    pub ecr_total: u64,
    /// Parameters moved per client.
    pub cost_params: u64,
    /// `8 · cost_params`.
    pub cost_bytes: u64,
}

impl CostSummary {
    pub fn from_ledger(variant: impl Into<String>, ledger: &CommLedger) -> Self {
        let cost = comm_cost(ledger);
        Self {
            variant: variant.into(),
            s_made: ledger.s_made,
            s_cls: ledger.s_cls,
            ecr_made: ledger.ecr_made,
            ecr_cls: ledger.ecr_cls,
            ecr_total: ledger.ecr_made + ledger.ecr_cls,
            cost_params: cost,
            cost_bytes: 8 * cost,
        }
    }
}

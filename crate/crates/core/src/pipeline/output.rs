use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{prepare_federation, run_phase1, run_phase2, Phase1Log, Phase1Output, RunReport};
use super::write_atomic;
use crate::data::write_idx;
use crate::density_ratio::{read_weights_csv, write_weights_csv, SampleWeights};
use crate::error::{Error, Result};
use crate::fl::{RoundMetrics, Variant};
use crate::metrics::{effective_rounds, feddisk_cost, CommLedger};

/// Subdirectory of the output dir holding phase-1 artifacts.
pub const PHASE1_DIR: &str = "phase1";

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report types serialize");
    v.push(b'\n');
    v
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingPath {
            path: path.to_path_buf(),
        });
    }
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn weights_csv_bytes(weights: &[SampleWeights]) -> Result<Vec<u8>> {
    let rows: Vec<(usize, &SampleWeights)> = weights.iter().enumerate().collect();
    let mut buf = Vec::new();
    write_weights_csv(&mut buf, &rows)?;
    Ok(buf)
}

/// Phase 1 end to end. Writes `weights.csv`, `phase1.json`,
/// `global_made.bin` and `shards.json` under `<output_dir>/phase1/`.
pub fn cmd_phase1(cfg: &ExperimentConfig) -> Result<Phase1Output> {
    let mut prep = prepare_federation(cfg)?;
    let out = run_phase1(cfg, &mut prep)?;
    let dir = cfg.output_dir.join(PHASE1_DIR);
    write_atomic(&dir.join("shards.json"), &json_bytes(&prep.manifests))?;
    write_atomic(&dir.join("global_made.bin"), &out.global.to_bytes())?;
    write_atomic(&dir.join("weights.csv"), &weights_csv_bytes(&out.weights)?)?;
    write_atomic(&dir.join("phase1.json"), &json_bytes(&out.log))?;
    Ok(out)
}

fn load_phase1(cfg: &ExperimentConfig) -> Result<(Vec<SampleWeights>, Phase1Log)> {
    let dir = cfg.output_dir.join(PHASE1_DIR);
    let log: Phase1Log = serde_json::from_slice(&read_file(&dir.join("phase1.json"))?)?;
    let weights = read_weights_csv(read_file(&dir.join("weights.csv"))?.as_slice())?
        .into_iter()
        .map(|values| SampleWeights {
            values,
            mode: cfg.weight_mode,
            clip: cfg.clip,
        })
        .collect();
    Ok((weights, log))
}

/// `round,mean_accuracy,train_loss,test_loss`, one row per round.
pub fn write_metrics_csv(path: &Path, rounds: &[RoundMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rounds {
        w.serialize(r).map_err(|e| Error::config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Phase 2 for `variant`. Writes `report.json`, `metrics.csv`, `cost.json`
/// and `percentiles.csv` under `<output_dir>/<variant>/`.
pub fn cmd_phase2(cfg: &ExperimentConfig, variant: Variant) -> Result<RunReport> {
    let mut prep = prepare_federation(cfg)?;
    let phase1 = match variant {
        Variant::FedDisk => Some(load_phase1(cfg)?),
        _ => None,
    };
    let report = run_phase2(
        cfg,
        &mut prep,
        variant,
        phase1.as_ref().map(|(w, log)| (w.as_slice(), log)),
    )?;
    let dir = cfg.output_dir.join(variant.as_str());
    if variant == Variant::FedDiskAb {
        let weights: Vec<SampleWeights> = prep
            .state
            .clients
            .iter()
            .filter_map(|c| c.weights.clone())
            .collect();
        write_atomic(&dir.join("weights.csv"), &weights_csv_bytes(&weights)?)?;
    }
    write_metrics_csv(&dir.join("metrics.csv"), &report.rounds)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &report.accuracy_percentiles {
        w.serialize(p).map_err(|e| Error::config(e.to_string()))?;
    }
    write_atomic(
        &dir.join("percentiles.csv"),
        &w.into_inner().map_err(|e| Error::config(e.to_string()))?,
    )?;
    write_atomic(&dir.join("cost.json"), &json_bytes(&report.cost))?;
    write_atomic(&dir.join("report.json"), &json_bytes(&report))?;
    Ok(report)
}

/// Write the configured dataset as `images.idx` and `labels.idx` in `dir`.
/// Pixels are quantized to bytes; images are laid out as `rows × cols` with
/// `rows` the largest divisor of the dimension not above its square root.
pub fn cmd_gen_data(cfg: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let ds = super::run::load_dataset(cfg)?;
    let dim = ds.dim();
    let rows = (1..=dim)
        .take_while(|r| r * r <= dim)
        .filter(|r| dim % r == 0)
        .last()
        .unwrap_or(1);
    let images = dir.join("images.idx");
    let labels = dir.join("labels.idx");
    write_idx(&ds, rows, dim / rows, &images, &labels)?;
    Ok((images, labels))
}

#[derive(Deserialize)]
struct RoundView {
    mean_accuracy: f64,
}

/// The parts of a `report.json` the comparison table needs. The ledger may
/// be missing from hand-assembled reports.
#[derive(Deserialize)]
struct ReportView {
    variant: String,
    dataset_signature: String,
    rounds: Vec<RoundView>,
    #[serde(default)]
    ledger: Option<CommLedger>,
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub run: String,
    pub variant: String,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub target_accuracy: f64,
    /// Classification rounds to reach the target; `n/a` if never reached.
    pub ecr_cls: String,
    pub ecr_made: String,
    pub ecr_total: String,
    pub cost_params: String,
    pub cost_bytes: String,
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    Ok(serde_json::from_slice(&read_file(
        &dir.join("report.json"),
    )?)?)
}

/// Comparison rows for the run directories. ECR is measured against the best
/// accuracy of the `fedavg` runs, or against the best of all runs when none
/// is a baseline.
pub fn report_table(dirs: &[PathBuf]) -> Result<Vec<ReportRow>> {
    if dirs.is_empty() {
        return Err(Error::config("report needs at least one run directory"));
    }
    let mut views = Vec::with_capacity(dirs.len());
    for d in dirs {
        let v: ReportView = serde_json::from_slice(&read_file(&d.join("report.json"))?)?;
        if v.rounds.is_empty() {
            return Err(Error::config(format!("{} has no rounds", d.display())));
        }
        views.push(v);
    }
    if let Some(v) = views
        .iter()
        .find(|v| v.dataset_signature != views[0].dataset_signature)
    {
        return Err(Error::config(format!(
            "runs disagree on the dataset: {} has signature {}, {} has {}",
            dirs[0].display(),
            views[0].dataset_signature,
            v.variant,
            v.dataset_signature
        )));
    }
    let best = |v: &ReportView| {
        v.rounds
            .iter()
            .map(|r| r.mean_accuracy)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let baselines: Vec<f64> = views
        .iter()
        .filter(|v| v.variant == Variant::FedAvg.as_str())
        .map(best)
        .collect();
    let pool = if baselines.is_empty() {
        views.iter().map(best).collect()
    } else {
        baselines
    };
    let target = pool.into_iter().fold(f64::NEG_INFINITY, f64::max);

    Ok(dirs
        .iter()
        .zip(&views)
        .map(|(d, v)| {
            let curve: Vec<f64> = v.rounds.iter().map(|r| r.mean_accuracy).collect();
            let ecr = effective_rounds(&curve, target);
            let na = || "n/a".to_string();
            let (ecr_made, ecr_total, cost_params, cost_bytes) = match (&v.ledger, ecr) {
                (Some(l), Some(e)) => {
                    let c = feddisk_cost(l.s_made, l.ecr_made, l.s_cls, e as u64);
                    (
                        l.ecr_made.to_string(),
                        (l.ecr_made + e as u64).to_string(),
                        c.to_string(),
                        (8 * c).to_string(),
                    )
                }
                (Some(l), None) => (l.ecr_made.to_string(), na(), na(), na()),
                (None, _) => (na(), na(), na(), na()),
            };
            ReportRow {
                run: d.display().to_string(),
                variant: v.variant.clone(),
                final_accuracy: *curve.last().expect("checked non-empty"),
                best_accuracy: best(v),
                target_accuracy: target,
                ecr_cls: ecr.map_or_else(na, |e| e.to_string()),
                ecr_made,
                ecr_total,
                cost_params,
                cost_bytes,
            }
        })
        .collect())
}

/// The comparison table as CSV text.
pub fn cmd_report(dirs: &[PathBuf]) -> Result<String> {
    let rows = report_table(dirs)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

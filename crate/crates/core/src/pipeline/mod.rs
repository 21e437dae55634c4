//! The experiment pipeline behind the `feddisk` binary: configuration,
//! federation setup, both phases, and the files each step writes.

mod config;
mod output;
mod run;

use std::path::Path;

use crate::error::{Error, Result};

pub use config::{
    ClassifierSettings, DatasetSource, ExperimentConfig, MadeSettings, OUTPUT_DIR_ENV,
    SCHEMA_VERSION,
};
pub use output::{
    cmd_gen_data, cmd_phase1, cmd_phase2, cmd_report, read_report, report_table, write_metrics_csv,
    ReportRow, PHASE1_DIR,
};
pub use run::{
    dataset_signature, load_dataset, percentiles, prepare_federation, prepare_from_dataset,
    raw_weights, run_phase1, run_phase2, ClientLeakage, DiscriminatorSummary, LocalMadeSummary,
    Percentile, Phase1Log, Phase1Output, Prepared, RunReport, PERCENTILES,
};

/// Write to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

//! Both phases and all three variants on a small synthetic federation,
//! written to a directory, followed by the comparison table.
//!
//! `cargo run --release --example end_to_end -- [out_dir]`

use std::path::PathBuf;

use feddisk::data::BlobSpec;
use feddisk::fl::Variant;
use feddisk::pipeline::{cmd_phase1, cmd_phase2, cmd_report, DatasetSource, ExperimentConfig};

fn main() -> feddisk::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("feddisk-e2e"));
    let mut cfg = ExperimentConfig {
        dataset: DatasetSource::Blobs(BlobSpec {
            samples: 1500,
            dim: 32,
            ..BlobSpec::default()
        }),
        clients: 5,
        output_dir: out.clone(),
        ..ExperimentConfig::default()
    };
    cfg.classifier.global_iters = 60;

    let p1 = cmd_phase1(&cfg)?;
    println!(
        "phase 1: global MADE {} rounds (best {})",
        p1.log.rounds_run, p1.log.best_round
    );
    for d in &p1.log.discriminators {
        println!(
            "  client {} discriminator acc {:.2} after {} epochs, weight std {:.3}",
            d.client, d.accuracy, d.epochs, d.weight_std
        );
    }
    let mut dirs = Vec::new();
    for v in [Variant::FedAvg, Variant::FedDisk, Variant::FedDiskAb] {
        let r = cmd_phase2(&cfg, v)?;
        println!(
            "{v:<11} best accuracy {:.3}, cost {} parameters",
            r.best_accuracy(),
            r.cost.cost_params
        );
        dirs.push(out.join(v.as_str()));
    }
    println!("\n{}", cmd_report(&dirs)?);
    println!("artifacts in {}", out.display());
    Ok(())
}

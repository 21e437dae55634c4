//! Plain FedAvg on a small noise-skewed blob federation, printing the
//! accuracy curve and the rounds needed to reach the best accuracy.

use feddisk::data::BlobSpec;
use feddisk::fl::Variant;
use feddisk::pipeline::{prepare_federation, run_phase2, DatasetSource, ExperimentConfig};

fn main() -> feddisk::Result<()> {
    let mut cfg = ExperimentConfig {
        dataset: DatasetSource::Blobs(BlobSpec {
            samples: 1000,
            dim: 32,
            ..BlobSpec::default()
        }),
        clients: 5,
        ..ExperimentConfig::default()
    };
    cfg.classifier.global_iters = 40;
    let mut prep = prepare_federation(&cfg)?;
    let report = run_phase2(&cfg, &mut prep, Variant::FedAvg, None)?;
    for r in report.rounds.iter().step_by(5) {
        println!(
            "round {:>3}  accuracy {:.3}  train loss {:.4}  test loss {:.4}",
            r.round, r.mean_accuracy, r.train_loss, r.test_loss
        );
    }
    println!(
        "\nbest accuracy {:.3} first reached at round {}",
        report.best_accuracy(),
        report.ledger.ecr_cls
    );
    println!(
        "classifier parameters {}, cost {} parameters per client",
        report.ledger.s_cls, report.cost.cost_params
    );
    for p in &report.accuracy_percentiles {
        println!("p{:<3} client accuracy {:.3}", p.percentile, p.accuracy);
    }
    Ok(())
}

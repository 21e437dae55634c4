//! Fit a MADE to a one-hot encoded Gaussian mixture and compare the model's
//! probability of each bin with the empirical bin frequency.

use feddisk::data::{synth_gaussian_mixture, BinEncoding, GaussianComponent, MixtureSpec};
use feddisk::made::{train_made, MadeModel, MadeTrainConfig};
use feddisk::nn::{SgdConfig, Tensor2D};
use feddisk::rng;

fn main() -> feddisk::Result<()> {
    let spec = MixtureSpec::new(vec![
        GaussianComponent {
            weight: 0.5,
            mean: 0.0,
            std: 1.0,
        },
        GaussianComponent {
            weight: 0.5,
            mean: 2.0,
            std: 1.0,
        },
    ])?;
    let enc = BinEncoding::default();
    let train = synth_gaussian_mixture(&spec, &enc, 3000, 1)?.encoded;
    let valid = synth_gaussian_mixture(&spec, &enc, 500, 2)?.encoded;

    let model = MadeModel::new(enc.bins, &[50], 0, &mut rng::stream(0, "init", 0))?;
    let cfg = MadeTrainConfig {
        sgd: SgdConfig {
            lr: 0.01,
            batch_size: 8,
        },
        ..MadeTrainConfig::default()
    };
    let fit = train_made(
        model,
        train.images(),
        valid.images(),
        &cfg,
        &mut rng::stream(0, "shuffle", 0),
    )?;
    println!(
        "epochs {} (best {}), validation loss {:.4} -> {:.4}",
        fit.epochs_run,
        fit.best_epoch,
        fit.initial_valid,
        fit.valid_curve[fit.best_epoch.max(1) - 1]
    );

    let mut counts = vec![0usize; enc.bins];
    for row in train.images().iter_rows() {
        counts[row.iter().position(|&v| v == 1.0).unwrap()] += 1;
    }
    let mut onehots = vec![0.0; enc.bins * enc.bins];
    for b in 0..enc.bins {
        onehots[b * enc.bins + b] = 1.0;
    }
    let nll = fit
        .model
        .per_sample_nll(&Tensor2D::new(enc.bins, enc.bins, onehots)?)?;
    println!("\nbin  empirical  model");
    for b in 0..enc.bins {
        println!(
            "{b:>3}  {:>9.4}  {:>5.4}",
            counts[b] as f64 / train.len() as f64,
            (-nll[b]).exp()
        );
    }
    let total: f64 = nll.iter().map(|v| (-v).exp()).sum();
    println!("mass on valid one-hot vectors: {total:.4}");
    Ok(())
}

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::time::Duration;

use common::{max_relative_error, mutual_information_bits, numeric_gradient, spearman, toy_joint};
use feddisk::data::BlobSpec;
use feddisk::fixtures::{gaussian_ratio_experiment, GaussianRatioConfig};
use feddisk::fl::{fedavg_aggregate, Variant};
use feddisk::made::MadeModel;
use feddisk::metrics::{
    baseline_cost, effective_rounds, feddisk_cost, leakage_bound, LeakageInput,
};
use feddisk::nn::{one_hot, Activation, LossKind, Network, ParamSnapshot, Tensor2D};
use feddisk::pipeline::{
    cmd_phase1, cmd_phase2, prepare_federation, run_phase1, run_phase2, DatasetSource,
    ExperimentConfig,
};
use feddisk::rng;
use feddisk_acceptance::{Outcome, Suite};
use rand::Rng;

fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, r: &mut impl Rng) -> Tensor2D {
    Tensor2D::new(
        rows,
        cols,
        (0..rows * cols).map(|_| r.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

fn gradient_oracle() -> Outcome {
    let mut r = rng::stream(11, "acceptance-nets", 0);
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let d = r.random_range(2..7);
        let h = r.random_range(2..9);
        let rows = r.random_range(2..6);
        let hidden = if i % 2 == 0 {
            Activation::Relu
        } else {
            Activation::Sigmoid
        };
        let x = uniform(rows, d, -1.0, 1.0, &mut r);
        let w: Vec<f64> = (0..rows).map(|_| r.random_range(0.1..2.0)).collect();
        let (net, t) = if i % 3 == 2 {
            let net = Network::mlp(
                &[d, h, d],
                hidden,
                Activation::Sigmoid,
                LossKind::BinaryCrossEntropy,
                &mut rng::stream(i, "init", 0),
            )
            .unwrap();
            (net, uniform(rows, d, 0.0, 1.0, &mut r))
        } else {
            let classes = r.random_range(2..5);
            let net = Network::mlp(
                &[d, h, classes],
                hidden,
                Activation::Softmax,
                LossKind::WeightedCrossEntropy,
                &mut rng::stream(i, "init", 0),
            )
            .unwrap();
            let labels: Vec<usize> = (0..rows).map(|_| r.random_range(0..classes)).collect();
            (net, one_hot(&labels, classes).unwrap())
        };
        let analytic: Vec<f64> = net
            .backward(&x, &t, &w)
            .unwrap()
            .gradients
            .iter_values()
            .collect();
        let numeric = numeric_gradient(&net, &x, &t, &w, 1e-5);
        worst = worst.max(max_relative_error(&analytic, &numeric, 1e-7));
    }
    Outcome::new(
        worst < 1e-4,
        format!("max relative error {worst:.2e} over 20 nets (< 1e-4)"),
    )
}

fn autoregressive_jacobian() -> Outcome {
    let d = 8;
    let model = MadeModel::new(d, &[32, 32], 7, &mut rng::stream(7, "init", 0)).unwrap();
    let x = uniform(16, d, 0.0, 1.0, &mut rng::stream(8, "acceptance-x", 0));
    let base = model.conditionals(&x).unwrap();
    let (mut forbidden_nonzero, mut allowed_nonzero) = (0usize, 0usize);
    for j in 0..d {
        let mut moved = x.clone();
        for r in 0..x.rows() {
            moved.set(r, j, 1.0 - x.get(r, j));
        }
        let out = model.conditionals(&moved).unwrap();
        for i in 0..d {
            for r in 0..x.rows() {
                let changed = out.get(r, i) != base.get(r, i);
                if j < i {
                    allowed_nonzero += changed as usize;
                } else {
                    forbidden_nonzero += changed as usize;
                }
            }
        }
    }
    Outcome::new(
        forbidden_nonzero == 0 && allowed_nonzero > 0,
        format!("{forbidden_nonzero} nonzero forbidden entries, {allowed_nonzero} nonzero allowed entries"),
    )
}

fn aggregation_oracle() -> Outcome {
    let mut r = rng::stream(3, "acceptance-agg", 0);
    let mut worst: f64 = 0.0;
    let mut identities = true;
    for _ in 0..100 {
        let k = r.random_range(1..8);
        let len = r.random_range(1..30);
        let sizes: Vec<usize> = (0..k).map(|_| r.random_range(1..500)).collect();
        let params: Vec<ParamSnapshot> = (0..k)
            .map(|_| {
                ParamSnapshot::new(
                    vec![(len, 0)],
                    (0..len).map(|_| r.random_range(-5.0..5.0)).collect(),
                )
                .unwrap()
            })
            .collect();
        let got = fedavg_aggregate(&params, &sizes).unwrap();
        // reference: normalized weights, summed from the last client down
        let total: f64 = sizes.iter().map(|&n| n as f64).sum();
        for c in 0..len {
            let expect: f64 = (0..k)
                .rev()
                .map(|i| sizes[i] as f64 / total * params[i].values()[c])
                .sum();
            worst = worst.max((got.values()[c] - expect).abs());
        }
        identities &= fedavg_aggregate(&params[..1], &sizes[..1]).unwrap() == params[0];
        let same = vec![params[0].clone(); k];
        identities &= fedavg_aggregate(&same, &sizes).unwrap() == params[0];
    }
    Outcome::new(
        worst <= 1e-12 && identities,
        format!("max deviation {worst:.2e} over 100 cases; exact identities hold: {identities}"),
    )
}

fn density_ratio_oracle() -> Outcome {
    let cfg = GaussianRatioConfig::default();
    let mut passing = 0;
    let mut details = Vec::new();
    for seed in 0..5 {
        let out = gaussian_ratio_experiment(&cfg, seed).unwrap();
        assert_eq!(out.values.len(), 2000);
        let rho = spearman(&out.weights, &out.true_ratio);
        passing += (rho >= 0.9) as usize;
        details.push(format!(
            "{rho:.3} (disc acc {:.2}; raw-x {:.3}; made llr {:.3})",
            out.discriminator_accuracy,
            spearman(&out.raw_weights, &out.true_ratio),
            spearman(&out.made_ratio, &out.true_ratio)
        ));
    }
    Outcome::new(
        passing >= 4,
        format!(
            "{passing}/5 seeds with Spearman >= 0.9; per seed: {}",
            details.join(", ")
        ),
    )
}

fn null_case() -> Outcome {
    let cfg = ExperimentConfig {
        clients: 4,
        noise_variance: 0.0,
        ..ExperimentConfig::default()
    };
    let mut prep = prepare_federation(&cfg).unwrap();
    let out = run_phase1(&cfg, &mut prep).unwrap();
    let stds: Vec<f64> = out.weights.iter().map(|w| w.std()).collect();
    let accs: Vec<String> = out
        .log
        .discriminators
        .iter()
        .map(|d| format!("{:.2}", d.accuracy))
        .collect();
    Outcome::new(
        stds.iter().all(|&s| s < 0.25),
        format!("per-client weight std {stds:.3?} (< 0.25); discriminator accuracy {accs:?}"),
    )
}

fn null_case_two_clients() -> Outcome {
    let cfg = ExperimentConfig {
        clients: 2,
        noise_variance: 0.0,
        ..ExperimentConfig::default()
    };
    let mut prep = prepare_federation(&cfg).unwrap();
    let out = run_phase1(&cfg, &mut prep).unwrap();
    let (lo, hi) = out
        .weights
        .iter()
        .flat_map(|w| w.values.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    Outcome::new(
        lo >= 0.5 && hi <= 1.5,
        format!("weights span [{lo:.3}, {hi:.3}] (within [0.5, 1.5])"),
    )
}

fn cost_fixtures() -> Outcome {
    let fedavg = baseline_cost(447_000, 1015);
    let feddisk = feddisk_cost(614_000, 15, 447_000, 105);
    let pass = fedavg == 907_410_000 && feddisk == 112_290_000;
    Outcome::new(pass, format!("{fedavg} (~907M) and {feddisk} (~112M)"))
}

fn privacy_bound() -> Outcome {
    let mut r = rng::stream(17, "acceptance-joints", 0);
    let dist = |r: &mut rng::Rng, n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let (mut cases, mut violations) = (0, 0);
    for k_count in [2usize, 3] {
        for _ in 0..10 {
            let kappa = dist(&mut r, k_count);
            let m = r.random_range(2..5);
            let q: Vec<Vec<f64>> = (0..k_count).map(|_| dist(&mut r, m)).collect();
            for k in 0..k_count {
                let mi = mutual_information_bits(&toy_joint(&kappa, &q, k));
                let bound = leakage_bound(&LeakageInput {
                    kappa: kappa[k],
                    distribution: q[k].clone(),
                })
                .unwrap();
                violations += (mi > bound + 1e-12) as usize;
                cases += 1;
            }
        }
    }
    let decay: Vec<f64> = [10usize, 100, 1000]
        .iter()
        .map(|&k| {
            leakage_bound(&LeakageInput {
                kappa: 1.0 / k as f64,
                distribution: vec![0.1; 10],
            })
            .unwrap()
        })
        .collect();
    let monotone = decay.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        violations == 0 && monotone,
        format!("{violations}/{cases} violations; bound at K=10,100,1000: {decay:.4?}"),
    )
}

fn directional_claim() -> Outcome {
    let mut wins = 0;
    let mut details = Vec::new();
    for seed in 0..5 {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::default()
        };
        let mut prep = prepare_federation(&cfg).unwrap();
        let phase1 = run_phase1(&cfg, &mut prep).unwrap();
        let mut base_prep = prepare_federation(&cfg).unwrap();
        let fedavg = run_phase2(&cfg, &mut base_prep, Variant::FedAvg, None).unwrap();
        let feddisk = run_phase2(
            &cfg,
            &mut prep,
            Variant::FedDisk,
            Some((&phase1.weights, &phase1.log)),
        )
        .unwrap();
        let target = fedavg.best_accuracy();
        let own = effective_rounds(&fedavg.accuracy_curve(), target).unwrap();
        let ours = effective_rounds(&feddisk.accuracy_curve(), target);
        wins += ours.is_some_and(|e| e < own) as usize;
        details.push(format!(
            "seed {seed}: fedavg {own} vs feddisk {} (target {target:.3})",
            ours.map_or("never".to_string(), |e| e.to_string())
        ));
    }
    Outcome::new(
        wins >= 4,
        format!(
            "{wins}/5 seeds strictly fewer rounds; {}",
            details.join("; ")
        ),
    )
}

fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        dataset: DatasetSource::Blobs(BlobSpec {
            samples: 600,
            dim: 16,
            classes: 4,
            ..BlobSpec::default()
        }),
        clients: 4,
        seed: 21,
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.made.max_rounds = 40;
    cfg.classifier.global_iters = 20;
    cfg
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let snapshot = |cfg: &ExperimentConfig| {
        cmd_phase1(cfg).unwrap();
        let mut files = vec![std::fs::read(dir.path().join("phase1/weights.csv")).unwrap()];
        for v in [Variant::FedAvg, Variant::FedDisk, Variant::FedDiskAb] {
            cmd_phase2(cfg, v).unwrap();
            files.push(std::fs::read(dir.path().join(v.as_str()).join("report.json")).unwrap());
        }
        files.push(std::fs::read(dir.path().join("feddisk-ab/weights.csv")).unwrap());
        files
    };
    let first = snapshot(&cfg);
    let second = snapshot(&cfg);
    let differing = first.iter().zip(&second).filter(|(a, b)| a != b).count();
    Outcome::new(
        differing == 0,
        format!(
            "{differing} of {} artifacts differ between two runs",
            first.len()
        ),
    )
}

fn main() {
    let mut suite = Suite::new();
    suite.check(
        "1",
        "gradient oracle",
        Some(Duration::from_secs(30)),
        gradient_oracle,
    );
    suite.check(
        "2",
        "autoregressive Jacobian, D=8",
        None,
        autoregressive_jacobian,
    );
    suite.check("3", "aggregation oracle", None, aggregation_oracle);
    suite.check(
        "4",
        "density-ratio oracle, two Gaussians",
        Some(Duration::from_secs(300)),
        density_ratio_oracle,
    );
    suite.check("5", "null case, K=4 IID", None, null_case);
    suite.check(
        "5b",
        "null case, 2-client IID phase 1",
        None,
        null_case_two_clients,
    );
    suite.check("6", "communication-cost fixtures", None, cost_fixtures);
    suite.check("7", "privacy bound", None, privacy_bound);
    suite.check(
        "8",
        "FedDisk reaches the FedAvg best sooner",
        Some(Duration::from_secs(1200)),
        directional_claim,
    );
    suite.check("9", "determinism", None, determinism);
    suite.finish();
}

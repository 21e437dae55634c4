use feddisk::data::{synth_blobs, BlobSpec, LabeledDataset};
use feddisk::density_ratio::SampleWeights;
use feddisk::fl::{
    client_stream, fedavg_aggregate, local_train_round, run_federated_classification,
    run_federated_made, ClassifierConfig, ClientState, FederatedMadeConfig, FederationState,
    LocalTrainConfig, Variant,
};
use feddisk::made::{train_made, MadeModel, MadeTrainConfig};
use feddisk::nn::{one_hot, Activation, LossKind, Network, ParamSnapshot, SgdConfig, Tensor2D};
use feddisk::{rng, Error};
use proptest::prelude::*;

fn client(id: usize, data: LabeledDataset) -> ClientState {
    let n = data.len();
    let cut = n - n / 5;
    let images = data.images().clone();
    ClientState {
        id,
        test: data.select(&(cut..n).collect::<Vec<_>>()),
        train: data.select(&(0..cut).collect::<Vec<_>>()),
        made_train: images.select_rows(&(0..cut * 4 / 5).collect::<Vec<_>>()),
        made_valid: images.select_rows(&(cut * 4 / 5..cut).collect::<Vec<_>>()),
        noise_variance: 0.0,
        local_made: None,
        weights: None,
    }
}

fn federation(k: usize, samples: usize, seed: u64) -> FederationState {
    let spec = BlobSpec {
        samples,
        dim: 8,
        classes: 3,
        ..BlobSpec::default()
    };
    let ds = synth_blobs(&spec, seed).unwrap();
    let per = samples / k;
    FederationState::new(
        (0..k)
            .map(|i| client(i, ds.select(&(i * per..(i + 1) * per).collect::<Vec<_>>())))
            .collect(),
    )
    .unwrap()
}

fn made_cfg() -> FederatedMadeConfig {
    FederatedMadeConfig {
        local: LocalTrainConfig {
            sgd: SgdConfig {
                lr: 0.05,
                batch_size: 8,
            },
            local_iters: 1,
        },
        max_rounds: 60,
        patience: 3,
        divergence_factor: 10.0,
    }
}

fn cls_cfg(global_iters: usize) -> ClassifierConfig {
    ClassifierConfig {
        hidden: vec![6],
        local: LocalTrainConfig {
            sgd: SgdConfig {
                lr: 0.05,
                batch_size: 8,
            },
            local_iters: 2,
        },
        global_iters,
    }
}

#[test]
fn aggregation_fixtures_and_errors() {
    let a = ParamSnapshot::new(vec![(1, 0)], vec![2.0]).unwrap();
    let b = ParamSnapshot::new(vec![(1, 0)], vec![6.0]).unwrap();
    assert_eq!(
        fedavg_aggregate(&[a.clone(), b.clone()], &[1, 3])
            .unwrap()
            .values(),
        &[5.0]
    );
    assert_eq!(fedavg_aggregate(&[a.clone()], &[7]).unwrap(), a);
    let c = ParamSnapshot::new(vec![(1, 1)], vec![1.0, 2.0]).unwrap();
    match fedavg_aggregate(&[a.clone(), b, c], &[1, 1, 1]) {
        Err(Error::Aggregation { client, .. }) => assert_eq!(client, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zero_local_iters_returns_global() {
    let net = Network::mlp(
        &[3, 4, 2],
        Activation::Relu,
        Activation::Softmax,
        LossKind::WeightedCrossEntropy,
        &mut rng::stream(1, "i", 0),
    )
    .unwrap();
    let g = net.snapshot();
    let x = Tensor2D::filled(4, 3, 0.5);
    let t = one_hot(&[0, 1, 0, 1], 2).unwrap();
    let cfg = LocalTrainConfig {
        sgd: SgdConfig::default(),
        local_iters: 0,
    };
    let (p, _) =
        local_train_round(&net, &g, &x, &t, None, &cfg, &mut rng::stream(1, "s", 0)).unwrap();
    assert_eq!(p, g);
}

#[test]
fn unweighted_equals_all_ones_bit_for_bit() {
    let net = Network::mlp(
        &[3, 4, 2],
        Activation::Relu,
        Activation::Softmax,
        LossKind::WeightedCrossEntropy,
        &mut rng::stream(1, "i", 0),
    )
    .unwrap();
    let x = Tensor2D::from_rows(&[
        [0.1, 0.2, 0.3],
        [0.9, 0.1, 0.5],
        [0.4, 0.4, 0.4],
        [0.0, 1.0, 0.2],
    ])
    .unwrap();
    let t = one_hot(&[0, 1, 0, 1], 2).unwrap();
    let cfg = LocalTrainConfig {
        sgd: SgdConfig {
            lr: 0.1,
            batch_size: 2,
        },
        local_iters: 3,
    };
    let (a, _) = local_train_round(
        &net,
        &net.snapshot(),
        &x,
        &t,
        None,
        &cfg,
        &mut rng::stream(4, "s", 0),
    )
    .unwrap();
    let (b, _) = local_train_round(
        &net,
        &net.snapshot(),
        &x,
        &t,
        Some(&[1.0; 4]),
        &cfg,
        &mut rng::stream(4, "s", 0),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn two_local_epochs_descend_on_logistic_fixture() {
    // a single softmax layer is convex in its parameters
    let net = Network::mlp(
        &[2, 2],
        Activation::Relu,
        Activation::Softmax,
        LossKind::WeightedCrossEntropy,
        &mut rng::stream(3, "i", 0),
    )
    .unwrap();
    let x = Tensor2D::from_rows(&[
        [0.0, 0.2],
        [0.3, 0.1],
        [0.8, 0.9],
        [1.0, 0.7],
        [0.2, 0.9],
        [0.9, 0.2],
    ])
    .unwrap();
    let t = one_hot(&[0, 0, 1, 1, 0, 1], 2).unwrap();
    let w = [1.0; 6];
    let cfg = LocalTrainConfig {
        sgd: SgdConfig {
            lr: 0.1,
            batch_size: 6,
        },
        local_iters: 2,
    };
    let before = net.loss(&x, &t, &w).unwrap();
    let (_, after) = local_train_round(
        &net,
        &net.snapshot(),
        &x,
        &t,
        None,
        &cfg,
        &mut rng::stream(0, "s", 0),
    )
    .unwrap();
    assert!(after.loss(&x, &t, &w).unwrap() <= before);
}

#[test]
fn single_client_federation_matches_local_training() {
    let mut state = federation(1, 300, 2);
    let init = MadeModel::new(8, &[10], 5, &mut rng::stream(2, "init", 0)).unwrap();
    let cfg = made_cfg();
    let fed = run_federated_made(&mut state, init.clone(), &cfg, 9).unwrap();
    let c = &state.clients[0];
    let local = train_made(
        init,
        &c.made_train,
        &c.made_valid,
        &MadeTrainConfig {
            sgd: cfg.local.sgd,
            max_iters: cfg.max_rounds,
            patience: cfg.patience,
        },
        &mut client_stream(9, "shuffle-made", 0),
    )
    .unwrap();
    assert_eq!(fed.rounds_run, local.epochs_run);
    assert_eq!(fed.best_round, local.best_epoch);
    for (r, v) in fed.rounds[1..].iter().zip(&local.valid_curve) {
        assert!((r.valid_nll - v).abs() <= 1e-12 * v.abs());
    }
    assert_eq!(fed.model.snapshot(), local.model.snapshot());
}

#[test]
fn made_rounds_respect_early_stop_contract() {
    let mut state = federation(3, 600, 4);
    let init = MadeModel::new(8, &[10], 5, &mut rng::stream(4, "init", 0)).unwrap();
    let fed = run_federated_made(&mut state, init, &made_cfg(), 1).unwrap();
    let best = fed.rounds[fed.best_round].valid_nll;
    assert!(best <= fed.rounds[0].valid_nll);
    assert_eq!(state.ledger.ecr_made as usize, fed.rounds_run);
    if fed.stopped_early {
        // recompute from the logged curve
        let curve: Vec<f64> = fed.rounds.iter().map(|r| r.valid_nll).collect();
        let argmin = curve
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v < curve[b] { i } else { b });
        assert_eq!(fed.rounds_run, argmin + 3);
    }
    assert_eq!(state.ledger.made_round_bytes.len(), fed.rounds_run);
}

#[test]
fn divergence_aborts_with_diagnostics() {
    let mut state = federation(2, 200, 4);
    let init = MadeModel::new(8, &[10], 5, &mut rng::stream(4, "init", 0)).unwrap();
    let cfg = FederatedMadeConfig {
        divergence_factor: 0.5,
        ..made_cfg()
    };
    assert!(matches!(
        run_federated_made(&mut state, init, &cfg, 1),
        Err(Error::Diverged(_))
    ));
}

#[test]
fn fedavg_equals_feddisk_with_unit_weights() {
    let mut plain = federation(3, 300, 7);
    let mut weighted = plain.clone();
    for c in weighted.clients.iter_mut() {
        c.weights = Some(SampleWeights::ones(c.train.len()));
    }
    let a = run_federated_classification(&mut plain, &cls_cfg(8), Variant::FedAvg, 3).unwrap();
    let b = run_federated_classification(&mut weighted, &cls_cfg(8), Variant::FedDisk, 3).unwrap();
    assert_eq!(a.rounds, b.rounds);
    assert_eq!(a.client_accuracy, b.client_accuracy);
    assert_eq!(plain.ledger, weighted.ledger);
}

#[test]
fn classification_report_has_one_point_per_round_and_leaves_data_alone() {
    let mut state = federation(2, 200, 8);
    let before: Vec<LabeledDataset> = state.clients.iter().map(|c| c.train.clone()).collect();
    let run = run_federated_classification(&mut state, &cls_cfg(5), Variant::FedAvg, 1).unwrap();
    assert_eq!(run.accuracy_curve().len(), 5);
    assert_eq!(state.ledger.cls_round_bytes.len(), 5);
    for (c, b) in state.clients.iter().zip(&before) {
        assert_eq!(&c.train, b);
    }
    assert!(run_federated_classification(&mut state, &cls_cfg(2), Variant::FedDisk, 1).is_err());
}

fn snapshot_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..6, 1usize..8).prop_flat_map(|(k, p)| {
        (
            proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, p), k),
            proptest::collection::vec(1usize..500, k),
        )
    })
}

proptest! {
    #[test]
    fn aggregate_is_a_convex_combination((values, sizes) in snapshot_strategy()) {
        let p = values[0].len();
        let snaps: Vec<ParamSnapshot> = values.iter().map(|v| ParamSnapshot::new(vec![(p, 0)], v.clone()).unwrap()).collect();
        let out = fedavg_aggregate(&snaps, &sizes).unwrap();
        for (i, v) in out.values().iter().enumerate() {
            let lo = values.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min);
            let hi = values.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= *v && *v <= hi);
        }
    }

    #[test]
    fn equal_sizes_give_the_plain_mean((values, _) in snapshot_strategy(), n in 1usize..100) {
        let p = values[0].len();
        let k = values.len();
        let snaps: Vec<ParamSnapshot> = values.iter().map(|v| ParamSnapshot::new(vec![(p, 0)], v.clone()).unwrap()).collect();
        let out = fedavg_aggregate(&snaps, &vec![n; k]).unwrap();
        for (i, v) in out.values().iter().enumerate() {
            let mean = values.iter().map(|c| c[i]).sum::<f64>() / k as f64;
            let lo = values.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min);
            let hi = values.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(*v, mean.clamp(lo, hi));
        }
    }
}

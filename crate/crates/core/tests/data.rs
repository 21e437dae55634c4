use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use feddisk::data::{
    apply_noise_skew, encode_idx, load_idx, noise_draws, noise_variance, partition_equal,
    split_train_test, synth_blobs, synth_gaussian_mixture, write_idx, BinEncoding, BlobSpec,
    GaussianComponent, IdxImages, IdxLabels, LabeledDataset, MixtureSpec,
};
use feddisk::nn::Tensor2D;
use feddisk::Error;
use proptest::prelude::*;

fn row_hashes(ds: &LabeledDataset) -> Vec<u64> {
    let mut out: Vec<u64> = (0..ds.len())
        .map(|i| {
            let mut h = DefaultHasher::new();
            for v in ds.images().row(i) {
                v.to_bits().hash(&mut h);
            }
            ds.labels()[i].hash(&mut h);
            h.finish()
        })
        .collect();
    out.sort_unstable();
    out
}

fn be(v: u32) -> [u8; 4] {
    v.to_be_bytes()
}

fn four_image_fixture() -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    img.extend(be(0x803));
    img.extend(be(4));
    img.extend(be(2));
    img.extend(be(3));
    img.extend((0u8..24).map(|i| i.wrapping_mul(37)));
    let mut lab = Vec::new();
    lab.extend(be(0x801));
    lab.extend(be(4));
    lab.extend([7u8, 0, 3, 7]);
    (img, lab)
}

#[test]
fn idx_fixture_round_trips_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab) = four_image_fixture();
    let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
    std::fs::write(&ip, &img).unwrap();
    std::fs::write(&lp, &lab).unwrap();
    let ds = load_idx(&ip, &lp).unwrap();
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.dim(), 6);
    assert_eq!(ds.labels(), &[7, 0, 3, 7]);
    assert_eq!(ds.images().get(0, 1), 37.0 / 255.0);
    let (ri, rl) = encode_idx(&ds, 2, 3).unwrap();
    assert_eq!(ri.to_bytes(), img);
    assert_eq!(rl.to_bytes(), lab);
    let (op, ol) = (dir.path().join("o.idx"), dir.path().join("ol.idx"));
    write_idx(&ds, 2, 3, &op, &ol).unwrap();
    assert_eq!(std::fs::read(op).unwrap(), img);
    assert_eq!(std::fs::read(ol).unwrap(), lab);
}

#[test]
fn idx_errors_carry_offsets() {
    let (img, lab) = four_image_fixture();
    match IdxImages::parse(&img[..20]) {
        Err(Error::Parse { offset, .. }) => assert_eq!(offset, 20),
        other => panic!("unexpected {other:?}"),
    }
    let mut bad = img.clone();
    bad[3] = 0x01;
    assert!(matches!(
        IdxImages::parse(&bad),
        Err(Error::Parse { offset: 0, .. })
    ));
    assert!(IdxLabels::parse(&lab[..6]).is_err());
    let mut empty = Vec::new();
    empty.extend(be(0x803));
    empty.extend(be(0));
    empty.extend(be(28));
    empty.extend(be(28));
    assert_eq!(IdxImages::parse(&empty).unwrap().count, 0);
    let missing = load_idx("/nonexistent/a.idx", "/nonexistent/b.idx");
    assert!(matches!(missing, Err(Error::MissingPath { .. })));
}

#[test]
fn partition_sizes_and_content() {
    let ds = synth_blobs(
        &BlobSpec {
            samples: 10,
            dim: 4,
            classes: 2,
            ..BlobSpec::default()
        },
        1,
    )
    .unwrap();
    let shards = partition_equal(&ds, 3, 5).unwrap();
    let mut sizes: Vec<usize> = shards.iter().map(|s| s.data.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![3, 3, 4]);
    let parts: Vec<&LabeledDataset> = shards.iter().map(|s| &s.data).collect();
    assert_eq!(
        row_hashes(&LabeledDataset::concat(&parts).unwrap()),
        row_hashes(&ds)
    );
    let one = partition_equal(&ds, 1, 5).unwrap();
    assert_eq!(row_hashes(&one[0].data), row_hashes(&ds));
    assert!(partition_equal(&ds, 11, 5).is_err());
}

#[test]
fn noise_variance_schedule() {
    assert_eq!(noise_variance(0, 10, 0.3), 0.0);
    assert!((noise_variance(99, 100, 0.3) - 0.297).abs() < 1e-15);
    assert!((noise_variance(9, 10, 0.3) - 0.297).abs() < 1e-15);
    let v: Vec<f64> = (0..10).map(|k| noise_variance(k, 10, 0.3)).collect();
    assert!(v.windows(2).all(|w| w[0] <= w[1]));

    let draws = noise_draws(10_000, 0.2, 3, 4);
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    assert!((var - 0.2).abs() / 0.2 < 0.05, "variance {var}");
}

#[test]
fn zero_noise_client_is_untouched_and_others_stay_in_range() {
    let ds = synth_blobs(
        &BlobSpec {
            samples: 50,
            dim: 6,
            ..BlobSpec::default()
        },
        2,
    )
    .unwrap();
    let (same, v) = apply_noise_skew(&ds, 0, 5, 0.3, 1).unwrap();
    assert_eq!(v, 0.0);
    assert_eq!(same, ds);
    let (noisy, v) = apply_noise_skew(&ds, 4, 5, 0.3, 1).unwrap();
    assert!(v > 0.0);
    assert!(noisy
        .images()
        .data()
        .iter()
        .all(|p| (0.0..=1.0).contains(p)));
    assert_ne!(noisy, ds);
}

#[test]
fn split_sizes_and_degenerate_case() {
    let ds = synth_blobs(
        &BlobSpec {
            samples: 100,
            dim: 3,
            classes: 4,
            ..BlobSpec::default()
        },
        3,
    )
    .unwrap();
    let (train, test) = split_train_test(&ds, 0.85, 1).unwrap();
    assert_eq!((train.len(), test.len()), (85, 15));
    let parts = [&train, &test];
    assert_eq!(
        row_hashes(&LabeledDataset::concat(&parts).unwrap()),
        row_hashes(&ds)
    );
    let one = ds.select(&[0]);
    let (t, e) = split_train_test(&one, 0.85, 1).unwrap();
    assert_eq!((t.len(), e.len()), (1, 0));
}

#[test]
fn mixture_moment_and_density_quadrature() {
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
    ])
    .unwrap();
    let s = synth_gaussian_mixture(&spec, &BinEncoding::default(), 10_000, 4).unwrap();
    let mean = s.values.iter().sum::<f64>() / s.values.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    let mut pts: Vec<(f64, f64)> = s
        .values
        .iter()
        .cloned()
        .zip(s.densities.iter().cloned())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let area: f64 = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    assert!((area - 1.0).abs() < 0.01, "area {area}");
    assert!(s
        .encoded
        .images()
        .iter_rows()
        .all(|r| r.iter().sum::<f64>() == 1.0));

    let point = MixtureSpec::new(vec![GaussianComponent {
        weight: 1.0,
        mean: 0.5,
        std: 0.0,
    }])
    .unwrap();
    let p = synth_gaussian_mixture(&point, &BinEncoding::default(), 20, 1).unwrap();
    assert!(p.values.iter().all(|&v| v == 0.5));
    assert!(MixtureSpec::new(vec![GaussianComponent {
        weight: 0.7,
        mean: 0.0,
        std: 1.0
    }])
    .is_err());
}

#[test]
fn dataset_rejects_out_of_range_pixels() {
    let t = Tensor2D::from_rows(&[[0.5, 1.2]]).unwrap();
    assert!(LabeledDataset::new(t, vec![0], 1).is_err());
    let t = Tensor2D::from_rows(&[[0.5, 0.2]]).unwrap();
    assert!(LabeledDataset::new(t, vec![3], 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_then_split_preserves_content(n in 2usize..80, k in 1usize..6, seed in 0u64..100) {
        prop_assume!(k <= n);
        let ds = synth_blobs(&BlobSpec { samples: n, dim: 3, classes: 3, ..BlobSpec::default() }, seed).unwrap();
        let shards = partition_equal(&ds, k, seed).unwrap();
        let sizes: Vec<usize> = shards.iter().map(|s| s.data.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut pieces = Vec::new();
        for s in &shards {
            let (a, b) = split_train_test(&s.data, 0.85, seed).unwrap();
            prop_assert_eq!(a.len(), ((0.85 * s.data.len() as f64) - 1e-9).ceil() as usize);
            pieces.push(a);
            pieces.push(b);
        }
        let refs: Vec<&LabeledDataset> = pieces.iter().collect();
        prop_assert_eq!(row_hashes(&LabeledDataset::concat(&refs).unwrap()), row_hashes(&ds));
        prop_assert_eq!(partition_equal(&ds, k, seed).unwrap().iter().map(|s| s.indices.clone()).collect::<Vec<_>>(),
            shards.iter().map(|s| s.indices.clone()).collect::<Vec<_>>());
    }
}

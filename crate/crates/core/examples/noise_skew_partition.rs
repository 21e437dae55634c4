//! Partition a blob dataset over clients with per-client noise and show the
//! resulting shard sizes and pixel statistics.

use feddisk::data::{apply_noise_skew, partition_equal, split_train_test, synth_blobs, BlobSpec};

fn main() -> feddisk::Result<()> {
    let (clients, base, seed) = (10, 0.3, 7);
    let ds = synth_blobs(&BlobSpec::default(), seed)?;
    println!(
        "{} samples, {} dims, {} classes",
        ds.len(),
        ds.dim(),
        ds.label_arity()
    );
    println!("\nclient  n   variance  train  test  pixel mean  pixel std");
    for shard in partition_equal(&ds, clients, seed)? {
        let (noisy, var) = apply_noise_skew(&shard.data, shard.client, clients, base, seed)?;
        let (train, test) = split_train_test(&noisy, 0.85, seed + shard.client as u64)?;
        let px = noisy.images().data();
        let mean = px.iter().sum::<f64>() / px.len() as f64;
        let std = (px.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / px.len() as f64).sqrt();
        println!(
            "{:>6} {:>4} {:>9.3} {:>6} {:>5} {:>11.4} {:>10.4}",
            shard.client,
            shard.data.len(),
            var,
            train.len(),
            test.len(),
            mean,
            std
        );
    }
    Ok(())
}

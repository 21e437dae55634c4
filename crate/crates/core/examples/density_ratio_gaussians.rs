//! Two clients, N(0,1) and N(2,1). Estimate sample weights for the first
//! client and compare them with the closed-form ratio p/q.

use feddisk::fixtures::{gaussian_ratio_experiment, GaussianRatioConfig};

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            r[idx[k]] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> feddisk::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let out = gaussian_ratio_experiment(&GaussianRatioConfig::default(), seed)?;
    println!("global MADE rounds: {}", out.made_rounds);
    println!(
        "discriminator training accuracy: {:.3}",
        out.discriminator_accuracy
    );
    println!(
        "Spearman vs true p/q over {} held-out points:",
        out.values.len()
    );
    println!(
        "  discriminator on MADE outputs  {:.3}",
        spearman(&out.weights, &out.true_ratio)
    );
    println!(
        "  discriminator on raw rows      {:.3}",
        spearman(&out.raw_weights, &out.true_ratio)
    );
    println!(
        "  MADE likelihood ratio          {:.3}",
        spearman(&out.made_ratio, &out.true_ratio)
    );

    println!("\n    x   true  weight  raw   made");
    let mut order: Vec<usize> = (0..out.values.len()).collect();
    order.sort_by(|&a, &b| out.values[a].total_cmp(&out.values[b]));
    for &i in order.iter().step_by(order.len() / 12) {
        println!(
            "{:>5.2} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            out.values[i], out.true_ratio[i], out.weights[i], out.raw_weights[i], out.made_ratio[i]
        );
    }
    Ok(())
}

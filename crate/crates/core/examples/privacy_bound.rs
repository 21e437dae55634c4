//! The leakage bound κ·H(Ẑ) for growing federations, plus one enumerated
//! joint where the bound can be checked directly.

use feddisk::metrics::{entropy_bits, leakage_bound, LeakageInput};

fn main() -> feddisk::Result<()> {
    let law = vec![0.1; 10];
    println!(
        "H = {:.4} bits for a uniform 10-class law",
        entropy_bits(&law)?
    );
    for k in [2usize, 10, 100, 1000] {
        let b = leakage_bound(&LeakageInput {
            kappa: 1.0 / k as f64,
            distribution: law.clone(),
        })?;
        println!("K = {k:>4}: bound {b:.5} bits");
    }

    // Θ = own client with probability κ, otherwise an independent client
    let kappa = 0.3;
    let own = [0.5, 0.3, 0.2];
    let other = [0.2, 0.2, 0.6];
    let mut joint = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            joint[a][b] = own[a] * (kappa * f64::from(u8::from(a == b)) + (1.0 - kappa) * other[b]);
        }
    }
    let pb: Vec<f64> = (0..3).map(|b| (0..3).map(|a| joint[a][b]).sum()).collect();
    let mut mi = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            if joint[a][b] > 0.0 {
                mi += joint[a][b] * (joint[a][b] / (own[a] * pb[b])).log2();
            }
        }
    }
    let bound = leakage_bound(&LeakageInput {
        kappa,
        distribution: own.to_vec(),
    })?;
    println!("\nenumerated I = {mi:.4} bits <= bound {bound:.4} bits");
    Ok(())
}

//! Communication cost arithmetic for a FedAvg baseline and a FedDisk run.

use feddisk::metrics::{baseline_cost, effective_rounds, feddisk_cost};

fn main() {
    let fedavg = baseline_cost(447_000, 1015);
    let feddisk = feddisk_cost(614_000, 15, 447_000, 105);
    println!(
        "FedAvg : 2 * 447000 * 1015 = {fedavg} (~{}M)",
        fedavg / 1_000_000
    );
    println!(
        "FedDisk: 2 * (614000 * 15 + 447000 * 105) = {feddisk} (~{}M)",
        feddisk / 1_000_000
    );
    println!("ratio {:.2}", fedavg as f64 / feddisk as f64);

    let curve = [0.31, 0.52, 0.64, 0.70, 0.73, 0.74, 0.74];
    let target = 0.73;
    println!(
        "\nrounds to reach {target} on {curve:?}: {:?}",
        effective_rounds(&curve, target)
    );
}

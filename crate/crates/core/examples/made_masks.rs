//! Print the connectivity of a small MADE and check which inputs can reach
//! which outputs.

use feddisk::made::build_masks;

fn main() -> feddisk::Result<()> {
    let d = 5;
    let masks = build_masks(d, &[8, 8], 42)?;
    println!("ordering: {:?}", masks.ordering());
    for (l, labels) in masks.hidden_labels().iter().enumerate() {
        println!("hidden layer {l} labels: {labels:?}");
    }

    // reachability = product of the binary masks
    let mut reach: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..d).map(|i| f64::from(u8::from(i == j))).collect())
        .collect();
    for m in masks.masks() {
        reach = reach
            .iter()
            .map(|row| {
                (0..m.rows())
                    .map(|o| (0..m.cols()).map(|i| m.get(o, i) * row[i]).sum())
                    .collect()
            })
            .collect();
    }
    println!("\npaths from input j (rows) to output i (cols):");
    for (j, row) in reach.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:>4}")).collect();
        println!("x{j}: {}", cells.join(""));
    }
    Ok(())
}

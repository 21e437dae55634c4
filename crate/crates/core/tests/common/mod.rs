#![allow(dead_code)]

use feddisk::nn::{Network, Tensor2D};

/// Average ranks (ties share the mean rank).
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Central-difference gradient of the network loss, in the same flat order
/// as `Gradients::iter_values` (per layer: weights row-major, then bias).
pub fn numeric_gradient(net: &Network, x: &Tensor2D, t: &Tensor2D, w: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut probe = net.clone();
    for li in 0..net.layers().len() {
        let nw = net.layers()[li].weights().len();
        for k in 0..nw {
            let orig = net.layers()[li].weights().data()[k];
            probe.layers_mut()[li].weights_mut().data_mut()[k] = orig + h;
            let up = probe.loss(x, t, w).unwrap();
            probe.layers_mut()[li].weights_mut().data_mut()[k] = orig - h;
            let down = probe.loss(x, t, w).unwrap();
            probe.layers_mut()[li].weights_mut().data_mut()[k] = orig;
            out.push((up - down) / (2.0 * h));
        }
        for k in 0..net.layers()[li].bias().len() {
            let orig = net.layers()[li].bias()[k];
            probe.layers_mut()[li].bias_mut()[k] = orig + h;
            let up = probe.loss(x, t, w).unwrap();
            probe.layers_mut()[li].bias_mut()[k] = orig - h;
            let down = probe.loss(x, t, w).unwrap();
            probe.layers_mut()[li].bias_mut()[k] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Max over coordinates of |a−n| / max(|a|+|n|, floor).
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Exact mutual information in bits of a joint table `p[a][b]`.
pub fn mutual_information_bits(joint: &[Vec<f64>]) -> f64 {
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let nb = joint[0].len();
    let pb: Vec<f64> = (0..nb).map(|b| joint.iter().map(|r| r[b]).sum()).collect();
    let mut mi = 0.0;
    for (a, row) in joint.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    mi
}

/// Checks the subset of JSON Schema used by the published report schema:
/// `type`, `required`, `properties`, `items`, `enum`, `minimum`, `maximum`.
pub fn validate_schema(
    schema: &serde_json::Value,
    value: &serde_json::Value,
    path: &str,
) -> Result<(), String> {
    use serde_json::Value;
    if let Some(t) = schema.get("type").and_then(Value::as_str) {
        let ok = match t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "integer" => value.is_u64() || value.is_i64(),
            "number" => value.is_number(),
            "boolean" => value.is_boolean(),
            _ => return Err(format!("{path}: unsupported type {t}")),
        };
        if !ok {
            return Err(format!("{path}: expected {t}, got {value}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return Err(format!("{path}: {value} not in {options:?}"));
        }
    }
    if let (Some(min), Some(v)) = (
        schema.get("minimum").and_then(Value::as_f64),
        value.as_f64(),
    ) {
        if v < min {
            return Err(format!("{path}: {v} < {min}"));
        }
    }
    if let (Some(max), Some(v)) = (
        schema.get("maximum").and_then(Value::as_f64),
        value.as_f64(),
    ) {
        if v > max {
            return Err(format!("{path}: {v} > {max}"));
        }
    }
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        for key in req {
            let key = key.as_str().unwrap();
            if value.get(key).is_none() {
                return Err(format!("{path}: missing {key}"));
            }
        }
    }
    if let (Some(props), Some(obj)) = (
        schema.get("properties").and_then(Value::as_object),
        value.as_object(),
    ) {
        for (k, sub) in props {
            if let Some(v) = obj.get(k) {
                validate_schema(sub, v, &format!("{path}.{k}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate_schema(items, v, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

/// Joint law of `(Ẑ_k, Ẑ_Θ)` where `Θ = i` with probability `κ_i`; client
/// `k`'s own output is copied, the others are independent draws.
pub fn toy_joint(kappa: &[f64], q: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let m = q[0].len();
    let mut joint = vec![vec![0.0; m]; m];
    for (i, (&ki, qi)) in kappa.iter().zip(q).enumerate() {
        for a in 0..m {
            for b in 0..m {
                joint[a][b] += ki
                    * if i == k {
                        q[k][a] * f64::from(u8::from(a == b))
                    } else {
                        q[k][a] * qi[b]
                    };
            }
        }
    }
    joint
}

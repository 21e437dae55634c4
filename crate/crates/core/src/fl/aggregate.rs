use crate::error::{Error, Result};
use crate::nn::ParamSnapshot;

/// Size-weighted average `Σ_k (N_k/N) · params_k`, accumulated in client
/// order. Each coordinate is kept inside the clients' `[min, max]` range, so
/// one client or identical clients are reproduced exactly; with equal sizes
/// this is the plain mean.
pub fn fedavg_aggregate(params: &[ParamSnapshot], sizes: &[usize]) -> Result<ParamSnapshot> {
    let first = params
        .first()
        .ok_or_else(|| Error::config("nothing to aggregate"))?;
    if params.len() != sizes.len() {
        return Err(Error::config(format!(
            "{} parameter sets but {} sizes",
            params.len(),
            sizes.len()
        )));
    }
    for (client, (p, &n)) in params.iter().zip(sizes).enumerate() {
        if p.shapes() != first.shapes() {
            return Err(Error::Aggregation {
                client,
                message: format!("shapes {:?} differ from {:?}", p.shapes(), first.shapes()),
            });
        }
        if n == 0 {
            return Err(Error::Aggregation {
                client,
                message: "client reports zero samples".into(),
            });
        }
    }
    if params.len() == 1 {
        return Ok(first.clone());
    }

    let equal = sizes.iter().all(|&n| n == sizes[0]);
    let weights: Vec<f64> = if equal {
        vec![1.0; sizes.len()]
    } else {
        sizes.iter().map(|&n| n as f64).collect()
    };
    let total: f64 = weights.iter().sum();

    let mut out = first.clone();
    for (i, slot) in out.values_mut().iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (p, w) in params.iter().zip(&weights) {
            let v = p.values()[i];
            acc += w * v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        *slot = (acc / total).clamp(lo, hi);
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing probability of a client and the empirical law of its samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageInput {
    pub kappa: f64,
    pub distribution: Vec<f64>,
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::config(
            "probabilities must be finite and non-negative",
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn entropy_bits(dist: &[f64]) -> Result<f64> {
    check_distribution(dist)?;
    Ok(-dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>())
}

/// `κ_k · H(Ẑ_k)` in bits: upper bound on `I(Ẑ_k; Ẑ_Θ)`.
pub fn leakage_bound(input: &LeakageInput) -> Result<f64> {
    if !(input.kappa > 0.0 && input.kappa <= 1.0) {
        return Err(Error::config(format!(
            "kappa {} must lie in (0,1]",
            input.kappa
        )));
    }
    Ok(input.kappa * entropy_bits(&input.distribution)?)
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A proposal draw with both densities and its normalized weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub theta: Vec<f64>,
    /// Un-normalized exact log posterior; `-inf` when the solve failed.
    pub log_true: f64,
    pub log_approx: f64,
    pub weight: f64,
    pub failed: bool,
}

/// Self-normalized weights `exp(log_true - log_approx)`; entries whose
/// `log_true` is not finite get weight 0.
pub fn importance_weights(log_true: &[f64], log_approx: &[f64]) -> Result<Vec<f64>> {
    if log_true.len() != log_approx.len() {
        return Err(Error::InvalidArgument("density vectors differ in length".into()));
    }
    let log_w: Vec<f64> = log_true
        .iter()
        .zip(log_approx)
        .map(|(t, a)| {
            if t.is_finite() && a.is_finite() {
                t - a
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoValidSamples(log_true.len()));
    }
    let mut w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    Ok(w)
}

/// Kish effective sample size `1 / sum w_i^2` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    if s > 0.0 {
        1.0 / s
    } else {
        0.0
    }
}

/// `sum_i w_i g(theta_i)`.
pub fn is_estimate<G>(g: G, thetas: &[Vec<f64>], weights: &[f64]) -> Vec<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut acc: Vec<f64> = Vec::new();
    for (th, w) in thetas.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let v = g(th);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += w * x;
        }
    }
    if acc.is_empty() {
        if let Some(th) = thetas.first() {
            acc = vec![0.0; g(th).len()];
        }
    }
    acc
}

/// Weighted posterior mean of theta.
pub fn weighted_mean(thetas: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    is_estimate(|t| t.to_vec(), thetas, weights)
}

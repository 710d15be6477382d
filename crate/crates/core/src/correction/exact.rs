use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::collocation::Prior;
use crate::error::{Error, Result};
use crate::gp::{Dataset, DIM_T, DIM_Z};
use crate::richards::SinkParams;
use crate::solver::Problem;

/// Inverse-Gamma hyperparameters for the marginalized noise variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoisePrior {
    pub alpha: f64,
    pub eta: f64,
}

impl Default for NoisePrior {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eta: 1.0,
        }
    }
}

impl NoisePrior {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.eta > 0.0 && self.alpha.is_finite() && self.eta.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("inverse-Gamma parameters must be positive: {self:?}")))
        }
    }

    /// `-(alpha + n/2) log(RSS/2 + eta)`.
    pub fn log_marginal(&self, rss: f64, n: usize) -> f64 {
        -(self.alpha + 0.5 * n as f64) * (0.5 * rss + self.eta).ln()
    }
}

/// Un-normalized log posterior of theta given model predictions at the data
/// points, with the noise variance integrated out.
pub fn log_true_posterior_from<F>(
    theta: &[f64],
    y: &[f64],
    prior: &Prior,
    noise: &NoisePrior,
    predict: F,
) -> Result<f64>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    let lp = prior.log_density(theta);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    let f = predict(theta)?;
    if f.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} observations",
            f.len(),
            y.len()
        )));
    }
    let rss: f64 = y.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(lp + noise.log_marginal(rss, y.len()))
}

/// Solver-backed exact posterior with an instrumented call counter.
#[derive(Debug)]
pub struct ExactPosterior<'a> {
    pub data: &'a Dataset,
    pub problem: &'a Problem,
    pub prior: Prior,
    pub noise: NoisePrior,
    calls: AtomicUsize,
}

impl<'a> ExactPosterior<'a> {
    pub fn new(data: &'a Dataset, problem: &'a Problem, prior: Prior, noise: NoisePrior) -> Self {
        Self {
            data,
            problem,
            prior,
            noise,
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of forward solves started so far.
    pub fn solver_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Field values at the data points for theta (one forward solve).
    pub fn predict(&self, theta: &SinkParams) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let field = self.problem.solve(theta)?;
        (0..self.data.len())
            .map(|i| field.interpolate(self.data.x[(i, DIM_Z)], self.data.x[(i, DIM_T)]))
            .collect()
    }

    /// Log posterior; outside the prior support this is `-inf` without a
    /// solve.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        let y: Vec<f64> = self.data.y.iter().copied().collect();
        log_true_posterior_from(theta, &y, &self.prior, &self.noise, |th| {
            self.predict(&SinkParams::from_slice(th))
        })
        .map_err(|e| Error::ForwardFailed {
            theta: theta.to_vec(),
            source: Box::new(e),
        })
    }
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Clipping applied to the scaled prior before forming odds.
pub const PRIOR_EPS: f64 = 1e-6;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Closed-form EI for minimization given the surrogate mean and SD at a point.
pub fn expected_improvement(mu: f64, s: f64, u_min: f64) -> f64 {
    let d = u_min - mu;
    if !(s > 0.0) {
        return d.max(0.0);
    }
    let z = d / s;
    let n = std_normal();
    (d * n.cdf(z) + s * n.pdf(z)).max(0.0)
}

/// `P(U < f_delta)` under the surrogate predictive.
pub fn probability_of_improvement(mu: f64, s: f64, f_delta: f64) -> f64 {
    if !(s > 0.0) {
        return if mu < f_delta { 1.0 } else { 0.0 };
    }
    std_normal().cdf((f_delta - mu) / s)
}

/// Frozen min-max map of approximate log-posterior values onto `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorScaler {
    pub min: f64,
    pub max: f64,
}

impl PriorScaler {
    /// From log-density values at a probe set; non-finite values are ignored.
    pub fn fit(values: &[f64]) -> Result<Self> {
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(max > min) {
            return Err(Error::DegenerateScaling);
        }
        Ok(Self { min, max })
    }

    pub fn scale(&self, v: f64) -> f64 {
        if v.is_nan() {
            return 0.0;
        }
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// `b_t / g_t = (1 - pi)(1 - M)^{t/tau} / (pi M^{t/tau})`, evaluated in log
/// space with `pi` clipped to `[eps, 1 - eps]`. Smaller is better.
pub fn bopro_log_ratio(pi: f64, m: f64, t: f64, tau: f64) -> f64 {
    let p = pi.clamp(PRIOR_EPS, 1.0 - PRIOR_EPS);
    let e = t / tau;
    let prior_term = (1.0 - p).ln() - p.ln();
    if e == 0.0 {
        return prior_term;
    }
    prior_term + e * ((1.0 - m).ln() - m.ln())
}

/// Same as [`bopro_log_ratio`] with `M = Phi(z)`, keeping both tails
/// accurate when `M` is close to 0 or 1.
pub fn bopro_log_ratio_z(pi: f64, z: f64, t: f64, tau: f64) -> f64 {
    let p = pi.clamp(PRIOR_EPS, 1.0 - PRIOR_EPS);
    let e = t / tau;
    let prior_term = (1.0 - p).ln() - p.ln();
    if e == 0.0 {
        return prior_term;
    }
    let n = std_normal();
    let lm = n.cdf(z).max(f64::MIN_POSITIVE).ln();
    let l1m = n.cdf(-z).max(f64::MIN_POSITIVE).ln();
    prior_term + e * (l1m - lm)
}

pub fn bopro_acquisition(pi: f64, m: f64, t: f64, tau: f64) -> f64 {
    bopro_log_ratio(pi, m, t, tau).exp()
}

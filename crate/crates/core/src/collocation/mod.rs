//! The sampled collocation posterior over theta and its MCMC exploration.

mod ensemble;
mod mcmc;
mod prior;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel, DIM_T, DIM_Z};
use crate::richards::{EnvironmentModel, SinkParams, SoilProfile};
use crate::seed::derive_seed;

pub use ensemble::{
    estimate_residual_covariance, log_approx_posterior, residual_vector, ResidualCovariance,
    ResidualEnsemble, CONTENT_MARGIN,
};
pub use mcmc::{metropolis_hastings, thin_chain, Chain, ThinnedDraw};
pub use prior::{Prior, PriorKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollocationConfig {
    pub n_s: usize,
    #[serde(rename = "N")]
    pub n_draws: usize,
    pub temperature: f64,
    /// Where `Sigma_{n_s}` is estimated; `None` means the prior box center.
    pub theta0: Option<SinkParams>,
    pub margin: f64,
    pub ridge_rel: f64,
    pub iterations: usize,
    pub burn_in_frac: f64,
    pub n_t: usize,
    /// Random-walk step for beta; `None` means 5% of the prior width.
    pub proposal_sd_beta: Option<f64>,
    #[serde(rename = "proposal_sd_Lm")]
    pub proposal_sd_lm: Option<f64>,
    pub seed: u64,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        Self {
            n_s: 10,
            n_draws: 100,
            temperature: 1.0,
            theta0: None,
            margin: 0.1,
            ridge_rel: 1e-8,
            iterations: 3000,
            burn_in_frac: 0.5,
            n_t: 15,
            proposal_sd_beta: None,
            proposal_sd_lm: None,
            seed: 0,
        }
    }
}

impl CollocationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::Config("n_s must be positive".into()));
        }
        if self.n_draws < 2 {
            return Err(Error::Config("N must be at least 2".into()));
        }
        if !(self.temperature >= 1.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(Error::Config("margin must lie in [0, 0.5)".into()));
        }
        if !(self.ridge_rel > 0.0) {
            return Err(Error::Config("ridge_rel must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_frac) {
            return Err(Error::Config("burn_in_frac must lie in [0, 1)".into()));
        }
        if self.n_t == 0 || self.iterations - self.iterations.min(
            (self.iterations as f64 * self.burn_in_frac).floor() as usize,
        ) < self.n_t
        {
            return Err(Error::Config(format!(
                "{} iterations with burn-in {} cannot supply n_t = {}",
                self.iterations, self.burn_in_frac, self.n_t
            )));
        }
        for sd in [self.proposal_sd_beta, self.proposal_sd_lm].into_iter().flatten() {
            if !(sd > 0.0) {
                return Err(Error::Config("proposal scales must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn theta0_or(&self, prior: &Prior) -> SinkParams {
        self.theta0.unwrap_or_else(|| SinkParams::from_slice(&prior.center()))
    }

    pub fn proposal_sd(&self, prior: &Prior) -> Vec<f64> {
        let w = prior.widths();
        vec![
            self.proposal_sd_beta.unwrap_or(0.05 * w[0]),
            self.proposal_sd_lm.unwrap_or(0.05 * w[1]),
        ]
    }
}

/// Indices of `n_s` design rows drawn uniformly without replacement after
/// dropping the first and last `margin` of the time range and the
/// shallowest and deepest levels (only when `margin > 0`). Sorted.
pub fn select_point_indices(data: &Dataset, n_s: usize, margin: f64, seed: u64) -> Result<Vec<usize>> {
    if data.dim() != 2 {
        return Err(Error::InvalidArgument("collocation needs (z, t) inputs".into()));
    }
    let col = |d: usize| data.x.column(d).iter().copied().collect::<Vec<f64>>();
    let (z, t) = (col(DIM_Z), col(DIM_T));
    let minmax = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)))
    };
    let (t_lo, t_hi) = minmax(&t);
    let (z_lo, z_hi) = minmax(&z);
    let keep: Vec<usize> = if margin > 0.0 {
        let cut = margin * (t_hi - t_lo);
        (0..data.len())
            .filter(|&i| {
                t[i] >= t_lo + cut && t[i] <= t_hi - cut && z[i] != z_lo && z[i] != z_hi
            })
            .collect()
    } else {
        (0..data.len()).collect()
    };
    if keep.len() < n_s {
        return Err(Error::Config(format!(
            "only {} interior points remain for n_s = {n_s}",
            keep.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, keep.len(), n_s)
        .into_iter()
        .map(|k| keep[k])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// The selected `(z, t)` points as an `n_s x 2` matrix.
pub fn select_points(data: &Dataset, n_s: usize, margin: f64, seed: u64) -> Result<DMatrix<f64>> {
    let idx = select_point_indices(data, n_s, margin, seed)?;
    Ok(DMatrix::from_fn(idx.len(), 2, |r, c| data.x[(idx[r], c)]))
}

/// `pi_GP^N` with everything needed to evaluate it.
#[derive(Clone, Debug)]
pub struct CollocationPosterior {
    pub ensemble: ResidualEnsemble,
    pub covariance: ResidualCovariance,
    pub prior: Prior,
    pub temperature: f64,
    pub theta0: SinkParams,
}

impl CollocationPosterior {
    /// Point selection, `N` joint draws and the covariance estimate at theta0.
    pub fn build(
        data: &Dataset,
        model: &GpModel,
        cfg: &CollocationConfig,
        prior: &Prior,
        profile: &SoilProfile,
        env: &EnvironmentModel,
    ) -> Result<Self> {
        cfg.validate()?;
        prior.validate()?;
        let points = select_points(data, cfg.n_s, cfg.margin, derive_seed(cfg.seed, 1))?;
        let ensemble = ResidualEnsemble::draw(
            model,
            points,
            cfg.n_draws,
            derive_seed(cfg.seed, 2),
            profile,
            env,
        )?;
        let theta0 = cfg.theta0_or(prior);
        let covariance = estimate_residual_covariance(&theta0, &ensemble, cfg.ridge_rel)?;
        Ok(Self {
            ensemble,
            covariance,
            prior: prior.clone(),
            temperature: cfg.temperature,
            theta0,
        })
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != 2 {
            return f64::NEG_INFINITY;
        }
        log_approx_posterior(
            &SinkParams::from_slice(theta),
            &self.ensemble,
            &self.covariance,
            &self.prior,
            self.temperature,
        )
    }

    /// Runs the sampler from theta0 (or the prior center if theta0 has zero
    /// density).
    pub fn sample(&self, cfg: &CollocationConfig) -> Result<Chain> {
        let mut init = self.theta0.as_array().to_vec();
        if self.log_density(&init) == f64::NEG_INFINITY {
            init = self.prior.center();
        }
        metropolis_hastings(
            |th| self.log_density(th),
            &init,
            &cfg.proposal_sd(&self.prior),
            cfg.iterations,
            derive_seed(cfg.seed, 3),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_data() -> Dataset {
        let mut z = vec![];
        let mut t = vec![];
        for day in 1..=90 {
            for k in 1..=6 {
                z.push(-0.05 * k as f64);
                t.push(day as f64 * 86400.0);
            }
        }
        let y = vec![0.3; z.len()];
        Dataset::from_columns(&z, &t, &y).unwrap()
    }

    #[test]
    fn margin_filter() {
        let d = grid_data();
        let idx = select_point_indices(&d, 200, 0.1, 4).unwrap();
        let t_lo = 86400.0 + 0.1 * 89.0 * 86400.0;
        let t_hi = 90.0 * 86400.0 - 0.1 * 89.0 * 86400.0;
        for i in idx {
            let (z, t) = (d.x[(i, 0)], d.x[(i, 1)]);
            assert!(t >= t_lo && t <= t_hi);
            assert!(z != -0.05 && z != -0.30);
        }
    }

    #[test]
    fn zero_margin_takes_everything_in_order() {
        let d = grid_data();
        let idx = select_point_indices(&d, d.len(), 0.0, 1).unwrap();
        assert_eq!(idx, (0..d.len()).collect::<Vec<_>>());
    }

    #[test]
    fn selection_is_seeded() {
        let d = grid_data();
        assert_eq!(
            select_point_indices(&d, 10, 0.1, 7).unwrap(),
            select_point_indices(&d, 10, 0.1, 7).unwrap()
        );
        assert!(select_point_indices(&d, 1000, 0.1, 7).is_err());
    }
}

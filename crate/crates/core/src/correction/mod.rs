//! Solver-in-the-loop correction of the collocation posterior: exact
//! posterior evaluation, importance weights, weighted KDE and HPD regions.

mod exact;
mod hpd;
mod importance;
mod kde;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collocation::{thin_chain, Chain, CollocationConfig, CollocationPosterior, Prior};
use crate::error::{Error, Result};
use crate::gp::{Dataset, FitOptions, GpHyperparams, GpModel, MeanMode};
use crate::seed::derive_seed;
use crate::solver::Problem;

pub use exact::{log_true_posterior_from, ExactPosterior, NoisePrior};
pub use hpd::{GridSpec, HpdRegion};
pub use importance::{effective_sample_size, importance_weights, is_estimate, weighted_mean, WeightedSample};
pub use kde::{Bandwidth, WeightedKde};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpcIConfig {
    pub collocation: CollocationConfig,
    pub noise: NoisePrior,
    /// Random restarts of the GP hyperparameter fit.
    pub gp_restarts: usize,
    pub hpd_level: f64,
    pub hpd_grid: [usize; 2],
    /// Lower bound on each KDE bandwidth, as a fraction of the prior width.
    pub bandwidth_floor_rel: f64,
}

impl Default for GpcIConfig {
    fn default() -> Self {
        Self {
            collocation: CollocationConfig::default(),
            noise: NoisePrior::default(),
            gp_restarts: 5,
            hpd_level: 0.95,
            hpd_grid: [100, 100],
            bandwidth_floor_rel: 0.15,
        }
    }
}

impl GpcIConfig {
    pub fn validate(&self) -> Result<()> {
        self.collocation.validate()?;
        self.noise.validate()?;
        if !(self.hpd_level > 0.0 && self.hpd_level < 1.0) {
            return Err(Error::Config(format!("hpd_level {} not in (0, 1)", self.hpd_level)));
        }
        if self.hpd_grid[0] < 2 || self.hpd_grid[1] < 2 {
            return Err(Error::Config("hpd_grid needs at least 2 cells per axis".into()));
        }
        if !(self.bandwidth_floor_rel >= 0.0) {
            return Err(Error::Config("bandwidth_floor_rel must be non-negative".into()));
        }
        Ok(())
    }
}

/// Fits the state surrogate by maximum marginal likelihood.
pub fn fit_state_surrogate(data: &Dataset, restarts: usize, seed: u64) -> Result<GpModel> {
    let init = GpHyperparams::initial_guess(data);
    let opts = FitOptions {
        restarts,
        seed,
        mean: MeanMode::SampleMean,
        ..Default::default()
    };
    GpModel::fit(data, &init, &opts)
}

#[derive(Clone, Debug)]
pub struct GpcIResult {
    /// IS posterior mean `(beta, L_m)`.
    pub estimate: Vec<f64>,
    pub samples: Vec<WeightedSample>,
    /// Kish ESS divided by the number of samples.
    pub ess_fraction: f64,
    pub kde: WeightedKde,
    pub hpd: HpdRegion,
    pub chain: Chain,
    pub solver_calls: usize,
}

/// The full GPC-I pipeline: surrogate fit, then [`run_gpc_i_with_model`].
pub fn run_gpc_i(data: &Dataset, cfg: &GpcIConfig, prior: &Prior, problem: &Problem) -> Result<GpcIResult> {
    cfg.validate()?;
    let model = fit_state_surrogate(data, cfg.gp_restarts, derive_seed(cfg.collocation.seed, 0))?;
    run_gpc_i_with_model(data, &model, cfg, prior, problem)
}

/// GPC-I given a fitted surrogate: collocation posterior, MCMC, thinning,
/// Weighted KDE of the corrected draws and its HPD region over the prior box.
pub fn posterior_density(
    thetas: &[Vec<f64>],
    weights: &[f64],
    prior: &Prior,
    cfg: &GpcIConfig,
) -> Result<(WeightedKde, HpdRegion)> {
    let floor: Vec<f64> = prior.widths().iter().map(|w| w * cfg.bandwidth_floor_rel).collect();
    let kde = WeightedKde::new(thetas, weights, &Bandwidth::Scott { floor })?;
    let b = prior.bounds();
    let grid = GridSpec::new([b[0].0, b[1].0], [b[0].1, b[1].1], cfg.hpd_grid)?;
    let hpd = HpdRegion::compute(|th| kde.density(th), &grid, cfg.hpd_level)?;
    Ok((kde, hpd))
}

/// `n_t` exact evaluations and the importance correction.
pub fn run_gpc_i_with_model(
    data: &Dataset,
    model: &GpModel,
    cfg: &GpcIConfig,
    prior: &Prior,
    problem: &Problem,
) -> Result<GpcIResult> {
    cfg.validate()?;
    let ccfg = &cfg.collocation;
    let post = CollocationPosterior::build(data, model, ccfg, prior, &problem.profile, &problem.env)?;
    let chain = post.sample(ccfg)?;
    info!("collocation chain acceptance {:.3}", chain.acceptance_rate);
    let draws = thin_chain(&chain, ccfg.burn_in_frac, ccfg.n_t)?;

    let exact = ExactPosterior::new(data, problem, prior.clone(), cfg.noise);
    let log_true: Vec<f64> = draws
        .par_iter()
        .map(|d| match exact.log_density(&d.theta) {
            Ok(v) => v,
            Err(e) => {
                warn!("{e}");
                f64::NEG_INFINITY
            }
        })
        .collect();
    let log_approx: Vec<f64> = draws.iter().map(|d| d.log_target).collect();
    let weights = importance_weights(&log_true, &log_approx)?;
    let samples: Vec<WeightedSample> = draws
        .iter()
        .zip(&log_true)
        .zip(&weights)
        .map(|((d, lt), w)| WeightedSample {
            theta: d.theta.clone(),
            log_true: *lt,
            log_approx: d.log_target,
            weight: *w,
            failed: !lt.is_finite(),
        })
        .collect();
    let thetas: Vec<Vec<f64>> = samples.iter().map(|s| s.theta.clone()).collect();
    let estimate = weighted_mean(&thetas, &weights);
    let ess_fraction = effective_sample_size(&weights) / samples.len() as f64;
    info!("importance ESS fraction {ess_fraction:.3}");

    let (kde, hpd) = posterior_density(&thetas, &weights, prior, cfg)?;
    Ok(GpcIResult {
        estimate,
        samples,
        ess_fraction,
        kde,
        hpd,
        chain,
        solver_calls: exact.solver_calls(),
    })
}

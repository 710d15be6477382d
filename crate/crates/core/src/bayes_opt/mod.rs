//! Bayesian optimization of the exact posterior (plain EI and the
//! collocation-guided variant) and the GPPDE point-estimate baseline.

mod acquisition;
mod gppde;
mod surrogate;

use log::{info, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collocation::{CollocationConfig, CollocationPosterior, Prior};
use crate::correction::{ExactPosterior, NoisePrior};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::seed::derive_seed;
use crate::solver::Problem;

pub use acquisition::{
    bopro_acquisition, bopro_log_ratio, bopro_log_ratio_z, expected_improvement, probability_of_improvement,
    PriorScaler, PRIOR_EPS,
};
pub use gppde::{gppde_estimate, GppdeResult, Ssre};
pub use surrogate::Surrogate;

/// Scaled prior over the optimum's location, values in `[0, 1]`.
pub type PriorFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoMode {
    /// Expected improvement on the surrogate alone.
    Bo,
    /// Expected improvement under the pseudo-posterior built from the scaled
    /// collocation posterior.
    BoGpc,
}

impl BoMode {
    pub fn label(self) -> &'static str {
        match self {
            BoMode::Bo => "bo",
            BoMode::BoGpc => "bo-gpc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoproConfig {
    pub delta: f64,
    pub tau: f64,
    pub n0: usize,
    #[serde(rename = "B")]
    pub iterations: usize,
    pub n_candidates: usize,
    pub surrogate_restarts: usize,
    pub noise_floor: f64,
    /// Pattern-search steps of the local polish after candidate search.
    pub polish_steps: usize,
    /// Added to the worst observed objective for failed evaluations.
    pub failure_penalty: f64,
}

impl Default for BoproConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            tau: 3.0,
            n0: 5,
            iterations: 10,
            n_candidates: 10_000,
            surrogate_restarts: 3,
            noise_floor: 1e-6,
            polish_steps: 40,
            failure_penalty: 10.0,
        }
    }
}

impl BoproConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config("tau must be positive".into()));
        }
        if self.n0 < 2 {
            return Err(Error::Config("n0 must be at least 2".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be positive".into()));
        }
        if !(self.noise_floor > 0.0) || !(self.failure_penalty > 0.0) {
            return Err(Error::Config("noise_floor and failure_penalty must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 0 for the initial design, then the iteration number.
    pub t: usize,
    pub theta: Vec<f64>,
    /// `None` when the evaluation failed.
    pub u: Option<f64>,
    pub mode: BoMode,
}

#[derive(Clone, Debug)]
pub struct BoResult {
    pub theta: Vec<f64>,
    pub u: f64,
    pub trace: Vec<TraceEntry>,
}

impl BoResult {
    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

/// Type-7 sample quantile.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points in the box with a random Cranley-Patterson shift.
pub fn halton_candidates(bounds: &[(f64, f64)], n: usize, seed: u64) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    assert!(bounds.len() <= PRIMES.len(), "halton candidates support up to 6 dimensions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = bounds.iter().map(|_| rng.random::<f64>()).collect();
    (1..=n as u64)
        .map(|i| {
            bounds
                .iter()
                .enumerate()
                .map(|(k, (lo, hi))| {
                    let u = (radical_inverse(i, PRIMES[k]) + shift[k]).fract();
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// Coordinate pattern search on `score` (minimized) within the box.
fn polish<F: Fn(&[f64]) -> f64>(score: F, x0: &[f64], f0: f64, bounds: &[(f64, f64)], steps: usize) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut step: Vec<f64> = bounds.iter().map(|(a, b)| 0.02 * (b - a)).collect();
    for _ in 0..steps {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] = (y[k] + dir * step[k]).clamp(bounds[k].0, bounds[k].1);
                let fy = score(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    x
}

/// Objective values with failures replaced by `worst + penalty`.
fn filled(u: &[Option<f64>], penalty: f64) -> Vec<f64> {
    let worst = u.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let sentinel = if worst.is_finite() { worst + penalty } else { penalty };
    u.iter().map(|v| v.unwrap_or(sentinel)).collect()
}

/// Sequential BO minimizing `objective` over the box with exactly
/// `n0 + B` objective calls. `prior` must be the scaled collocation
/// posterior (values in `[0, 1]`) when `mode` is [`BoMode::BoGpc`].
pub fn run_bo<F>(
    mut objective: F,
    bounds: &[(f64, f64)],
    cfg: &BoproConfig,
    mode: BoMode,
    prior: Option<&PriorFn<'_>>,
    seed: u64,
) -> Result<BoResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    if bounds.is_empty() || bounds.iter().any(|(a, b)| !(b > a)) {
        return Err(Error::InvalidArgument("BO needs a non-empty box".into()));
    }
    if mode == BoMode::BoGpc && prior.is_none() {
        return Err(Error::InvalidArgument("prior-guided BO needs a scaled prior".into()));
    }
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let candidates = halton_candidates(bounds, cfg.n_candidates, derive_seed(seed, 5));
    let cand_x = DMatrix::from_fn(candidates.len(), dim, |i, k| candidates[i][k]);
    let cand_prior: Vec<f64> = match (mode, prior) {
        (BoMode::BoGpc, Some(p)) => {
            use rayon::prelude::*;
            candidates.par_iter().map(|c| p(c)).collect()
        }
        _ => Vec::new(),
    };

    let mut thetas: Vec<Vec<f64>> = Vec::new();
    let mut u: Vec<Option<f64>> = Vec::new();
    let mut trace = Vec::new();
    let mut evaluate = |theta: Vec<f64>, t: usize, thetas: &mut Vec<Vec<f64>>, u: &mut Vec<Option<f64>>| {
        let v = match objective(&theta) {
            Ok(v) if v.is_finite() => Some(v),
            Ok(v) => {
                warn!("objective returned {v} at {theta:?}");
                None
            }
            Err(e) => {
                warn!("objective failed: {e}");
                None
            }
        };
        trace.push(TraceEntry {
            t,
            theta: theta.clone(),
            u: v,
            mode,
        });
        thetas.push(theta);
        u.push(v);
    };

    for _ in 0..cfg.n0 {
        let th: Vec<f64> = bounds.iter().map(|(a, b)| rng.random_range(*a..*b)).collect();
        evaluate(th, 0, &mut thetas, &mut u);
    }

    for t in 1..=cfg.iterations {
        let uf = filled(&u, cfg.failure_penalty);
        let next = if u.iter().all(Option::is_none) {
            None
        } else {
            match Surrogate::fit(&thetas, &uf, cfg.surrogate_restarts, cfg.noise_floor, derive_seed(seed, 100 + t as u64)) {
                Ok(s) => Some(select_next(&s, &uf, &candidates, &cand_x, &cand_prior, prior, bounds, cfg, mode, t)?),
                Err(e) => {
                    warn!("surrogate fit failed at iteration {t}: {e}");
                    None
                }
            }
        };
        let th = next.unwrap_or_else(|| bounds.iter().map(|(a, b)| rng.random_range(*a..*b)).collect());
        evaluate(th, t, &mut thetas, &mut u);
    }

    let best = u
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((i, v)) => Ok(BoResult {
            theta: thetas[i].clone(),
            u: v,
            trace,
        }),
        None => Err(Error::OptimizationFailed {
            reason: "every objective evaluation failed".into(),
            best_value: f64::NAN,
            best_point: Vec::new(),
        }),
    }
}

#[allow(clippy::too_many_arguments)]
fn select_next(
    s: &Surrogate,
    u: &[f64],
    candidates: &[Vec<f64>],
    cand_x: &DMatrix<f64>,
    cand_prior: &[f64],
    prior: Option<&PriorFn<'_>>,
    bounds: &[(f64, f64)],
    cfg: &BoproConfig,
    mode: BoMode,
    t: usize,
) -> Result<Vec<f64>> {
    let (mu, sd) = s.predict(cand_x)?;
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    let f_delta = quantile(u, cfg.delta);
    let tt = t as f64;
    let z = |m: f64, sd: f64| {
        if sd > 0.0 {
            (f_delta - m) / sd
        } else if m < f_delta {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    };
    let scores: Vec<f64> = match mode {
        BoMode::Bo => mu.iter().zip(&sd).map(|(m, s)| -expected_improvement(*m, *s, u_min)).collect(),
        BoMode::BoGpc => (0..candidates.len())
            .map(|i| bopro_log_ratio_z(cand_prior[i], z(mu[i], sd[i]), tt, cfg.tau))
            .collect(),
    };
    let (best, best_score) = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("candidate set is non-empty");
    let score_at = |x: &[f64]| -> f64 {
        let Ok((m, sdv)) = s.predict_one(x) else {
            return f64::INFINITY;
        };
        match mode {
            BoMode::Bo => -expected_improvement(m, sdv, u_min),
            BoMode::BoGpc => {
                let p = prior.map_or(0.5, |p| p(x));
                bopro_log_ratio_z(p, z(m, sdv), tt, cfg.tau)
            }
        }
    };
    Ok(polish(score_at, &candidates[best], best_score, bounds, cfg.polish_steps))
}

/// Settings for the solver-backed BO pipelines.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoRunConfig {
    pub bopro: BoproConfig,
    pub noise: NoisePrior,
    /// Used by BO-GPC to build the guiding prior.
    pub collocation: CollocationConfig,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct BoRun {
    pub result: BoResult,
    pub solver_calls: usize,
    pub scaler: Option<PriorScaler>,
}

/// Plain BO or BO-GPC on `u = -log pi(theta | data)` over the prior box.
/// `model` is required for BO-GPC.
pub fn run_bo_pipeline(
    data: &Dataset,
    model: Option<&GpModel>,
    cfg: &BoRunConfig,
    mode: BoMode,
    prior: &Prior,
    problem: &Problem,
) -> Result<BoRun> {
    cfg.bopro.validate()?;
    // the prior support is open, so stay strictly inside it
    let bounds: Vec<(f64, f64)> = prior
        .bounds()
        .iter()
        .map(|(a, b)| {
            let e = 1e-9 * (b - a);
            (a + e, b - e)
        })
        .collect();
    let exact = ExactPosterior::new(data, problem, prior.clone(), cfg.noise);
    let objective = |th: &[f64]| exact.log_density(th).map(|v| -v);
    let (result, scaler) = match mode {
        BoMode::Bo => (run_bo(objective, &bounds, &cfg.bopro, mode, None, cfg.seed)?, None),
        BoMode::BoGpc => {
            let model = model.ok_or_else(|| Error::InvalidArgument("BO-GPC needs a fitted state surrogate".into()))?;
            let post = CollocationPosterior::build(data, model, &cfg.collocation, prior, &problem.profile, &problem.env)?;
            let chain = post.sample(&cfg.collocation)?;
            let burn = chain.burn_in(cfg.collocation.burn_in_frac);
            let scaler = PriorScaler::fit(&chain.log_target[burn..])?;
            info!("BO-GPC prior scaled on [{:.3}, {:.3}]", scaler.min, scaler.max);
            let scaled = |th: &[f64]| scaler.scale(post.log_density(th));
            (run_bo(objective, &bounds, &cfg.bopro, mode, Some(&scaled), cfg.seed)?, Some(scaler))
        }
    };
    Ok(BoRun {
        result,
        solver_calls: exact.solver_calls(),
        scaler,
    })
}

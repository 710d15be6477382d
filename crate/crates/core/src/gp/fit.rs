//! Maximum-marginal-likelihood hyperparameter estimation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::value_and_gradient;
use super::{Dataset, GpHyperparams};
use crate::error::{Error, Result};
use crate::optim::{minimize, LbfgsOptions, Status};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Use `init.mean_constant` unchanged.
    #[default]
    Keep,
    Zero,
    SampleMean,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Random restarts in addition to the supplied initial point.
    pub restarts: usize,
    pub seed: u64,
    pub mean: MeanMode,
    /// Lower bound on the noise variance, relative to the response variance.
    pub noise_floor_rel: f64,
    /// Absolute lower bound on the noise variance.
    pub noise_floor_abs: f64,
    pub lbfgs: LbfgsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            mean: MeanMode::Keep,
            noise_floor_rel: 1e-8,
            noise_floor_abs: 0.0,
            lbfgs: LbfgsOptions {
                max_iter: 200,
                grad_tol: 1e-6,
                f_rel_tol: 1e-11,
                ..Default::default()
            },
        }
    }
}

/// Per-dimension affine map of inputs onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct InputScaling {
    pub offset: Vec<f64>,
    pub range: Vec<f64>,
}

impl InputScaling {
    pub fn from_design(x: &DMatrix<f64>) -> Self {
        let m = x.ncols();
        let mut offset = vec![0.0; m];
        let mut range = vec![1.0; m];
        for d in 0..m {
            let col = x.column(d);
            let lo = col.min();
            let hi = col.max();
            offset[d] = lo;
            if hi > lo {
                range[d] = hi - lo;
            }
        }
        Self { offset, range }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, d| (x[(i, d)] - self.offset[d]) / self.range[d])
    }
}

pub fn fit_hyperparameters(
    data: &Dataset,
    init: &GpHyperparams,
    opts: &FitOptions,
) -> Result<GpHyperparams> {
    init.validate()?;
    let m = data.dim();
    if init.length_scales.len() != m {
        return Err(Error::InvalidArgument(format!(
            "init has {} length scales for {m} inputs",
            init.length_scales.len()
        )));
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument("need at least two observations to fit".into()));
    }
    let mean = match opts.mean {
        MeanMode::Keep => init.mean_constant,
        MeanMode::Zero => 0.0,
        MeanMode::SampleMean => data.mean(),
    };
    let scaling = InputScaling::from_design(&data.x);
    let xs = scaling.apply(&data.x);
    let var = {
        let v = data.sample_variance();
        if v > 0.0 {
            v
        } else {
            data.y.iter().map(|y| (y - mean).powi(2)).sum::<f64>().max(1e-12) / data.len() as f64
        }
    };
    let floor = (var * opts.noise_floor_rel).max(opts.noise_floor_abs).max(1e-300);

    let mut bounds: Vec<(f64, f64)> = (0..m).map(|_| (1e-3f64.ln(), 1e3f64.ln())).collect();
    bounds.push(((var * 1e-6).ln(), (var * 1e4).ln()));
    bounds.push((floor.ln(), (var * 1e2).ln().max(floor.ln())));

    let mut starts = Vec::with_capacity(opts.restarts + 1);
    let mut z0: Vec<f64> = init
        .length_scales
        .iter()
        .zip(&scaling.range)
        .map(|(l, r)| (l / r).ln())
        .collect();
    z0.push(init.signal_variance.ln());
    z0.push(init.noise_variance.max(floor).ln());
    starts.push(z0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let mut z: Vec<f64> = (0..m)
            .map(|_| rng.random_range(1e-2f64.ln()..1e2f64.ln()))
            .collect();
        z.push((var * rng.random_range(0.1f64.ln()..10f64.ln()).exp()).ln());
        z.push((var * rng.random_range(1e-4f64.ln()..1e-1f64.ln()).exp()).max(floor).ln());
        starts.push(z);
    }

    let y = &data.y;
    let results: Vec<Option<crate::optim::Minimum>> = starts
        .par_iter()
        .map(|z0| {
            let mut obj = |z: &[f64]| {
                value_and_gradient(&xs, y, z, mean)
                    .ok()
                    .map(|(v, g)| (-v, g.into_iter().map(|x| -x).collect()))
            };
            minimize(&mut obj, z0, Some(&bounds), &opts.lbfgs)
        })
        .collect();

    let mut best: Option<crate::optim::Minimum> = None;
    let mut any_progress = false;
    for r in results.into_iter().flatten() {
        if !(r.status == Status::LineSearchFailed && r.iterations == 0) {
            any_progress = true;
        }
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let Some(best) = best else {
        return Err(Error::OptimizationFailed {
            reason: "marginal likelihood not evaluable at any start".into(),
            best_value: f64::NEG_INFINITY,
            best_point: vec![],
        });
    };
    if !any_progress && best.grad_norm > opts.lbfgs.grad_tol {
        return Err(Error::OptimizationFailed {
            reason: "line search failed from every start".into(),
            best_value: -best.value,
            best_point: best.x,
        });
    }
    let scaled = GpHyperparams::from_log(&best.x, mean);
    Ok(GpHyperparams {
        length_scales: scaled
            .length_scales
            .iter()
            .zip(&scaling.range)
            .map(|(l, r)| l * r)
            .collect(),
        ..scaled
    })
}

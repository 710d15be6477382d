//! Log marginal likelihood of the GP and its gradient in log-hyperparameter space.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Dataset, GpHyperparams};
use crate::error::{Error, Result};
use crate::linalg::cholesky_jittered;

pub fn log_marginal_likelihood(data: &Dataset, hp: &GpHyperparams) -> Result<f64> {
    hp.validate()?;
    check_dims(data, hp.length_scales.len())?;
    let ky = noisy_kernel(&data.x, hp);
    let ch = cholesky_jittered(&ky)?;
    let r = residual(data, hp.mean_constant);
    let alpha = ch.solve(&r);
    let n = data.len() as f64;
    Ok(-0.5 * r.dot(&alpha) - 0.5 * ch.log_det() - 0.5 * n * (2.0 * PI).ln())
}

/// Gradient of the log marginal likelihood with respect to
/// `zeta = (log l_1, .., log l_m, log sigma_s^2, log sigma_y^2)`.
pub fn log_marginal_gradient(data: &Dataset, zeta: &[f64], mean_constant: f64) -> Result<Vec<f64>> {
    value_and_gradient(&data.x, &data.y, zeta, mean_constant).map(|(_, g)| g)
}

fn check_dims(data: &Dataset, m: usize) -> Result<()> {
    if data.dim() != m {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} inputs but {} length scales were given",
            data.dim(),
            m
        )));
    }
    Ok(())
}

fn residual(data: &Dataset, mean: f64) -> DVector<f64> {
    data.y.map(|v| v - mean)
}

pub(crate) fn noisy_kernel(x: &DMatrix<f64>, hp: &GpHyperparams) -> DMatrix<f64> {
    let mut k = super::kernel::block_unchecked(
        &super::DerivativeOrderSpec::VALUE,
        x,
        x,
        &hp.length_scales,
        hp.signal_variance,
    );
    for i in 0..k.nrows() {
        k[(i, i)] += hp.noise_variance;
    }
    k
}

/// Log marginal likelihood and its log-space gradient in one pass.
pub(crate) fn value_and_gradient(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    zeta: &[f64],
    mean_constant: f64,
) -> Result<(f64, Vec<f64>)> {
    let m = x.ncols();
    if zeta.len() != m + 2 {
        return Err(Error::InvalidArgument(format!(
            "expected {} log-hyperparameters, got {}",
            m + 2,
            zeta.len()
        )));
    }
    if zeta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite log-hyperparameters".into()));
    }
    let hp = GpHyperparams::from_log(zeta, mean_constant);
    let n = x.nrows();
    let ky = noisy_kernel(x, &hp);
    let ch = cholesky_jittered(&ky)?;
    let r = y.map(|v| v - mean_constant);
    let alpha = ch.solve(&r);
    let value =
        -0.5 * r.dot(&alpha) - 0.5 * ch.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();

    // 1/2 tr((alpha alpha^T - K_y^{-1}) dK/dzeta_h), exploiting symmetry.
    let w = ch.inverse();
    let mut grad = vec![0.0; m + 2];
    for j in 0..n {
        for i in 0..=j {
            let kij = ky[(i, j)] - if i == j { hp.noise_variance } else { 0.0 };
            let a = alpha[i] * alpha[j] - w[(i, j)];
            let mult = if i == j { 0.5 } else { 1.0 };
            for h in 0..m {
                let d = (x[(i, h)] - x[(j, h)]) / hp.length_scales[h];
                grad[h] += mult * a * kij * d * d;
            }
            grad[m] += mult * a * kij;
        }
        grad[m + 1] += 0.5 * (alpha[j] * alpha[j] - w[(j, j)]) * hp.noise_variance;
    }
    Ok((value, grad))
}

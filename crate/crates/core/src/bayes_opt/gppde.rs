use log::warn;
use nalgebra::DMatrix;

use crate::collocation::ResidualEnsemble;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel, RICHARDS_DERIVATIVES};
use crate::optim::{minimize, LbfgsOptions};
use crate::richards::{EnvironmentModel, SinkParams, SoilProfile};

/// Sum of squared residuals with `omega` fixed to point estimates.
#[derive(Clone, Debug)]
pub struct Ssre {
    ensemble: ResidualEnsemble,
}

#[derive(Clone, Debug)]
pub struct GppdeResult {
    pub theta: Vec<f64>,
    pub ssre: f64,
    pub initial_ssre: f64,
    /// False when the optimizer stopped without meeting its tolerances.
    pub converged: bool,
}

impl Ssre {
    /// `omega` holds `(f, f_z, f_t, f_zz)` per point, one row per point.
    pub fn from_states(omega: &DMatrix<f64>, points: DMatrix<f64>, profile: &SoilProfile, env: &EnvironmentModel) -> Result<Self> {
        let n = points.nrows();
        if omega.nrows() != n || omega.ncols() != 4 {
            return Err(Error::InvalidArgument("state matrix must be n x 4".into()));
        }
        // derivative-major row layout expected by the ensemble
        let row = DMatrix::from_fn(1, 4 * n, |_, c| omega[(c % n, c / n)]);
        Ok(Self {
            ensemble: ResidualEnsemble::from_draws(row, points, profile, env)?,
        })
    }

    /// GP posterior means of the states at every data point.
    pub fn from_model(data: &Dataset, model: &GpModel, profile: &SoilProfile, env: &EnvironmentModel) -> Result<Self> {
        let means = model.derivative_means(&data.x, &RICHARDS_DERIVATIVES)?;
        let n = data.len();
        let omega = DMatrix::from_fn(n, 4, |i, k| means[k][i]);
        Self::from_states(&omega, data.x.clone(), profile, env)
    }

    pub fn value_and_gradient(&self, theta: &[f64]) -> (f64, [f64; 2]) {
        let (xi, jac) = self.ensemble.residual_with_gradient(0, &SinkParams::from_slice(theta));
        let g = jac.tr_mul(&xi) * 2.0;
        (xi.norm_squared(), [g[0], g[1]])
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_and_gradient(theta).0
    }

    /// Bounded quasi-Newton minimization from `init`.
    pub fn minimize(&self, bounds: &[(f64, f64)], init: &[f64], opts: &LbfgsOptions) -> Result<GppdeResult> {
        let initial_ssre = self.value(init);
        // SSRE is O(1e-18) in SI units; rescale so tolerances are meaningful
        let scale = if initial_ssre > 0.0 { 1.0 / initial_ssre } else { 1.0 };
        let mut f = |x: &[f64]| {
            let (v, g) = self.value_and_gradient(x);
            v.is_finite().then(|| (v * scale, vec![g[0] * scale, g[1] * scale]))
        };
        let m = minimize(&mut f, init, Some(bounds), opts).ok_or_else(|| Error::OptimizationFailed {
            reason: "SSRE not evaluable at the initial point".into(),
            best_value: f64::NAN,
            best_point: init.to_vec(),
        })?;
        let converged = m.converged();
        if !converged {
            warn!("GPPDE optimizer stopped with {:?}", m.status);
        }
        Ok(GppdeResult {
            ssre: m.value / scale,
            theta: m.x,
            initial_ssre,
            converged,
        })
    }
}

/// The GPPDE baseline: minimize SSRE over the box from its center (or `init`).
pub fn gppde_estimate(
    data: &Dataset,
    model: &GpModel,
    profile: &SoilProfile,
    env: &EnvironmentModel,
    bounds: &[(f64, f64)],
    init: Option<&[f64]>,
    opts: &LbfgsOptions,
) -> Result<GppdeResult> {
    let ssre = Ssre::from_model(data, model, profile, env)?;
    let center: Vec<f64> = bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    ssre.minimize(bounds, init.unwrap_or(&center), opts)
}

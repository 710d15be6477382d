use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{sample_gaussian, GpModel};
use crate::linalg::{log_sum_exp, JitteredCholesky};
use crate::richards::{
    residual_parts, sink_with_gradient, EnvironmentModel, SinkParams, SoilProfile,
    StateDerivatives,
};

use super::prior::Prior;

/// Distance kept between a sampled water content and the retention bounds.
pub const CONTENT_MARGIN: f64 = 1e-6;

/// Pulls `f` into `(c_r, c_s)` shrunk by [`CONTENT_MARGIN`]; reports whether
/// it moved.
fn clamp_content(f: f64, c_r: f64, c_s: f64) -> (f64, bool) {
    let lo = c_r + CONTENT_MARGIN;
    let hi = c_s - CONTENT_MARGIN;
    if f < lo {
        (lo, true)
    } else if f > hi {
        (hi, true)
    } else if f.is_nan() {
        (0.5 * (lo + hi), true)
    } else {
        (f, false)
    }
}

fn omega_at(row: &[f64], n_s: usize, i: usize) -> StateDerivatives {
    StateDerivatives::new(row[i], row[n_s + i], row[2 * n_s + i], row[3 * n_s + i])
}

/// Residual vector of one joint draw; also returns the number of clamped
/// water contents. `omega_row` is laid out `[f.., f_z.., f_t.., f_zz..]`.
pub fn residual_vector(
    theta: &SinkParams,
    omega_row: &[f64],
    points: &DMatrix<f64>,
    profile: &SoilProfile,
    env: &EnvironmentModel,
) -> Result<(DVector<f64>, usize)> {
    let n_s = points.nrows();
    if omega_row.len() != 4 * n_s {
        return Err(Error::InvalidArgument(format!(
            "draw has {} entries, expected {}",
            omega_row.len(),
            4 * n_s
        )));
    }
    let mut clamps = 0;
    let mut xi = DVector::zeros(n_s);
    for i in 0..n_s {
        let (z, t) = (points[(i, 0)], points[(i, 1)]);
        let soil = profile.layer_at(z.abs())?;
        let mut om = omega_at(omega_row, n_s, i);
        let (f, moved) = clamp_content(om.f, soil.c_r, soil.c_s);
        om.f = f;
        clamps += moved as usize;
        let parts = residual_parts(&om, z, t, profile, env)?;
        env.rooting_depth(theta, t)?;
        let (s, _) = sink_with_gradient(parts.intensity, z, env.root_fraction(t), theta);
        xi[i] = parts.base + s;
    }
    Ok((xi, clamps))
}

/// `N` joint draws of `omega` at the selected points, with the theta-free
/// parts of every residual cached so that `xi(theta)` costs one sink
/// evaluation per entry.
#[derive(Clone, Debug)]
pub struct ResidualEnsemble {
    points: DMatrix<f64>,
    omega: DMatrix<f64>,
    base: DMatrix<f64>,
    intensity: DMatrix<f64>,
    depth: Vec<f64>,
    times: Vec<f64>,
    root_frac: Vec<f64>,
    clamp_events: usize,
}

impl ResidualEnsemble {
    pub fn from_draws(
        omega: DMatrix<f64>,
        points: DMatrix<f64>,
        profile: &SoilProfile,
        env: &EnvironmentModel,
    ) -> Result<Self> {
        let n_s = points.nrows();
        let n = omega.nrows();
        if points.ncols() != 2 || omega.ncols() != 4 * n_s || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "draw matrix {}x{} does not match {} points",
                n,
                omega.ncols(),
                n_s
            )));
        }
        let mut base = DMatrix::zeros(n, n_s);
        let mut intensity = DMatrix::zeros(n, n_s);
        let mut clamps = 0;
        for r in 0..n {
            let row: Vec<f64> = omega.row(r).iter().copied().collect();
            for i in 0..n_s {
                let (z, t) = (points[(i, 0)], points[(i, 1)]);
                let soil = profile.layer_at(z.abs())?;
                let mut om = omega_at(&row, n_s, i);
                let (f, moved) = clamp_content(om.f, soil.c_r, soil.c_s);
                om.f = f;
                clamps += moved as usize;
                let parts = residual_parts(&om, z, t, profile, env)?;
                base[(r, i)] = parts.base;
                intensity[(r, i)] = parts.intensity;
            }
        }
        if clamps > 0 {
            warn!("clamped {clamps} sampled water contents into the retention range");
        }
        let depth = points.column(0).iter().map(|z| z.abs()).collect();
        let times: Vec<f64> = points.column(1).iter().copied().collect();
        let root_frac = times.iter().map(|t| env.root_fraction(*t)).collect();
        Ok(Self {
            points,
            omega,
            base,
            intensity,
            depth,
            times,
            root_frac,
            clamp_events: clamps,
        })
    }

    /// Draws `n` joint samples from the GP and builds the ensemble.
    pub fn draw(
        model: &GpModel,
        points: DMatrix<f64>,
        n: usize,
        seed: u64,
        profile: &SoilProfile,
        env: &EnvironmentModel,
    ) -> Result<Self> {
        let block = model.joint_state_derivatives(&points)?;
        let omega = sample_gaussian(&block, n, seed)?;
        Self::from_draws(omega, points, profile, env)
    }

    pub fn n_draws(&self) -> usize {
        self.omega.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn omega_samples(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Sink at every selected point for theta.
    fn sinks(&self, r: usize, theta: &SinkParams, out: &mut DVector<f64>) {
        for i in 0..self.n_points() {
            let (s, _) = sink_with_gradient(self.intensity[(r, i)], self.depth[i], self.root_frac[i], theta);
            out[i] = self.base[(r, i)] + s;
        }
    }

    pub fn residual(&self, r: usize, theta: &SinkParams) -> DVector<f64> {
        let mut xi = DVector::zeros(self.n_points());
        self.sinks(r, theta, &mut xi);
        xi
    }

    /// Residual of draw `r` and its Jacobian in `(beta, L_m)` (`n_s x 2`).
    pub fn residual_with_gradient(&self, r: usize, theta: &SinkParams) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n_points();
        let mut xi = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 2);
        for i in 0..n {
            let (s, g) = sink_with_gradient(self.intensity[(r, i)], self.depth[i], self.root_frac[i], theta);
            xi[i] = self.base[(r, i)] + s;
            jac[(i, 0)] = g[0];
            jac[(i, 1)] = g[1];
        }
        (xi, jac)
    }

    /// All residual vectors, one per row.
    pub fn residuals(&self, theta: &SinkParams) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_draws(), self.n_points());
        let mut xi = DVector::zeros(self.n_points());
        for r in 0..self.n_draws() {
            self.sinks(r, theta, &mut xi);
            out.row_mut(r).copy_from(&xi.transpose());
        }
        out
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// `Sigma_{n_s}` and its factor.
#[derive(Clone, Debug)]
pub struct ResidualCovariance {
    pub sigma: DMatrix<f64>,
    pub ridge: f64,
    chol: JitteredCholesky,
}

impl ResidualCovariance {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let chol = crate::linalg::cholesky_jittered(&sigma)?;
        Ok(Self {
            sigma,
            ridge: 0.0,
            chol,
        })
    }

    /// `xi^T Sigma^{-1} xi`.
    pub fn quadratic_form(&self, xi: &DVector<f64>) -> f64 {
        self.chol.solve_lower(xi).norm_squared()
    }
}

const MAX_RIDGE_STEPS: usize = 12;

/// Sample covariance of `xi(theta0)` over the draws, plus a ridge starting at
/// `ridge_rel` times the mean diagonal and growing tenfold until the
/// Cholesky factorization succeeds.
pub fn estimate_residual_covariance(
    theta0: &SinkParams,
    ensemble: &ResidualEnsemble,
    ridge_rel: f64,
) -> Result<ResidualCovariance> {
    let n = ensemble.n_draws();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "residual covariance needs at least two draws".into(),
        ));
    }
    let xs = ensemble.residuals(theta0);
    let q = xs.ncols();
    let mean = xs.row_mean();
    let mut centered = xs.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let mut scale = cov.diagonal().mean();
    if !(scale > 0.0) {
        // Identical draws: fall back to the residual magnitude.
        scale = xs.iter().map(|v| v * v).sum::<f64>() / (n * q) as f64;
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::DegenerateCovariance(
            "all residuals are identically zero".into(),
        ));
    }
    let mut ridge = ridge_rel * scale;
    for _ in 0..MAX_RIDGE_STEPS {
        let mut s = cov.clone();
        for i in 0..q {
            s[(i, i)] += ridge;
        }
        if let Some(ch) = s.clone().cholesky() {
            return Ok(ResidualCovariance {
                sigma: s,
                ridge,
                chol: JitteredCholesky {
                    factor: ch,
                    jitter: 0.0,
                },
            });
        }
        ridge *= 10.0;
    }
    Err(Error::DegenerateCovariance(format!(
        "not positive definite even with ridge {ridge:e}"
    )))
}

/// `log pi_0(theta) + (1/tau) log sum_i exp(-xi_i^T Sigma^{-1} xi_i / 2)`.
pub fn log_approx_posterior(
    theta: &SinkParams,
    ensemble: &ResidualEnsemble,
    cov: &ResidualCovariance,
    prior: &Prior,
    temperature: f64,
) -> f64 {
    let lp = prior.log_density(&theta.as_array());
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let mut xi = DVector::zeros(ensemble.n_points());
    let terms: Vec<f64> = (0..ensemble.n_draws())
        .map(|r| {
            ensemble.sinks(r, theta, &mut xi);
            -0.5 * cov.quadratic_form(&xi)
        })
        .collect();
    lp + log_sum_exp(&terms) / temperature
}

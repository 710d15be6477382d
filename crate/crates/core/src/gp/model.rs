//! A GP conditioned on data: predictive distributions over states and
//! derivatives.
//!
//! Kernel algebra runs on inputs standardized to `[0, 1]` per dimension;
//! derivative covariances are mapped back to physical units by the chain rule
//! (one factor `1 / range_d` per order of differentiation in dimension `d`).

use nalgebra::{DMatrix, DVector};

use super::fit::{fit_hyperparameters, FitOptions, InputScaling};
use super::kernel::{block_unchecked, DerivativeOrderSpec};
use super::{Dataset, Derivative, GaussianBlock, GpHyperparams, Label, RICHARDS_DERIVATIVES};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, symmetrize, JitteredCholesky};

#[derive(Clone, Debug)]
pub struct GpModel {
    hp: GpHyperparams,
    scaling: InputScaling,
    xs: DMatrix<f64>,
    ls_scaled: Vec<f64>,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
}

impl GpModel {
    pub fn new(data: &Dataset, hp: GpHyperparams) -> Result<Self> {
        hp.validate()?;
        if hp.length_scales.len() != data.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} length scales for {} inputs",
                hp.length_scales.len(),
                data.dim()
            )));
        }
        let scaling = InputScaling::from_design(&data.x);
        let xs = scaling.apply(&data.x);
        let ls_scaled: Vec<f64> = hp
            .length_scales
            .iter()
            .zip(&scaling.range)
            .map(|(l, r)| l / r)
            .collect();
        let mut ky = block_unchecked(
            &DerivativeOrderSpec::VALUE,
            &xs,
            &xs,
            &ls_scaled,
            hp.signal_variance,
        );
        for i in 0..ky.nrows() {
            ky[(i, i)] += hp.noise_variance;
        }
        let chol = cholesky_jittered(&ky)?;
        let r = data.y.map(|v| v - hp.mean_constant);
        let alpha = chol.solve(&r);
        Ok(Self {
            hp,
            scaling,
            xs,
            ls_scaled,
            chol,
            alpha,
        })
    }

    pub fn fit(data: &Dataset, init: &GpHyperparams, opts: &FitOptions) -> Result<Self> {
        let hp = fit_hyperparameters(data, init, opts)?;
        Self::new(data, hp)
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    pub fn n_train(&self) -> usize {
        self.xs.nrows()
    }

    fn check_points(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.xs.ncols() {
            return Err(Error::InvalidArgument(format!(
                "test points have {} columns, expected {}",
                x.ncols(),
                self.xs.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite test point".into()));
        }
        Ok(())
    }

    fn chain_factor(&self, d: Derivative) -> f64 {
        if d.order == 0 {
            1.0
        } else {
            self.scaling.range[d.dim].powi(-(d.order as i32))
        }
    }

    fn cross_spec(d: Derivative) -> DerivativeOrderSpec {
        DerivativeOrderSpec::new(0, 0, d.order, d.dim)
    }

    /// Covariance between training responses and `d` at the test points, in
    /// physical units.
    fn cross_block(&self, xs_sel: &DMatrix<f64>, d: Derivative) -> DMatrix<f64> {
        let mut c = block_unchecked(
            &Self::cross_spec(d),
            &self.xs,
            xs_sel,
            &self.ls_scaled,
            self.hp.signal_variance,
        );
        let f = self.chain_factor(d);
        if f != 1.0 {
            c *= f;
        }
        c
    }

    fn check_derivatives(&self, derivs: &[Derivative]) -> Result<()> {
        let m = self.xs.ncols();
        for a in derivs {
            for b in derivs {
                DerivativeOrderSpec::new(a.order, a.dim, b.order, b.dim).validate(m)?;
            }
        }
        Ok(())
    }

    /// Predictive means only, one vector per requested derivative.
    pub fn derivative_means(
        &self,
        x_sel: &DMatrix<f64>,
        derivs: &[Derivative],
    ) -> Result<Vec<DVector<f64>>> {
        self.check_points(x_sel)?;
        self.check_derivatives(derivs)?;
        let xs_sel = self.scaling.apply(x_sel);
        Ok(derivs
            .iter()
            .map(|&d| {
                let c = self.cross_block(&xs_sel, d);
                let mut mu = c.tr_mul(&self.alpha);
                if d.order == 0 {
                    mu.add_scalar_mut(self.hp.mean_constant);
                }
                mu
            })
            .collect())
    }

    /// Joint Gaussian over the requested derivatives at every point, laid out
    /// derivative-major: all points for `derivs[0]`, then `derivs[1]`, ...
    pub fn joint(&self, x_sel: &DMatrix<f64>, derivs: &[Derivative]) -> Result<GaussianBlock> {
        self.check_points(x_sel)?;
        self.check_derivatives(derivs)?;
        let xs_sel = self.scaling.apply(x_sel);
        let ns = x_sel.nrows();
        let q = ns * derivs.len();
        let n = self.xs.nrows();

        let mut c1 = DMatrix::zeros(n, q);
        for (a, &d) in derivs.iter().enumerate() {
            c1.columns_mut(a * ns, ns).copy_from(&self.cross_block(&xs_sel, d));
        }
        let mut mean = c1.tr_mul(&self.alpha);
        for (a, d) in derivs.iter().enumerate() {
            if d.order == 0 {
                for i in 0..ns {
                    mean[a * ns + i] += self.hp.mean_constant;
                }
            }
        }

        let mut c2 = DMatrix::zeros(q, q);
        for (a, &da) in derivs.iter().enumerate() {
            for (b, &db) in derivs.iter().enumerate() {
                let spec = DerivativeOrderSpec::new(da.order, da.dim, db.order, db.dim);
                let mut blk = block_unchecked(
                    &spec,
                    &xs_sel,
                    &xs_sel,
                    &self.ls_scaled,
                    self.hp.signal_variance,
                );
                blk *= self.chain_factor(da) * self.chain_factor(db);
                c2.view_mut((a * ns, b * ns), (ns, ns)).copy_from(&blk);
            }
        }
        let l = self.chol.l();
        let v = l
            .solve_lower_triangular(&c1)
            .ok_or(Error::NumericalSingularity { jitter: self.chol.jitter })?;
        let mut cov = c2 - v.tr_mul(&v);
        symmetrize(&mut cov);

        let labels = derivs
            .iter()
            .flat_map(|&d| (0..ns).map(move |i| Label { point: i, derivative: d }))
            .collect();
        Ok(GaussianBlock {
            mean,
            covariance: cov,
            labels,
        })
    }

    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<GaussianBlock> {
        self.joint(x_star, &[Derivative::VALUE])
    }

    /// Pointwise predictive means and latent variances, skipping the joint
    /// covariance.
    pub fn predict_marginal(&self, x_star: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_points(x_star)?;
        let xs_sel = self.scaling.apply(x_star);
        let c = self.cross_block(&xs_sel, Derivative::VALUE);
        let mean = c.tr_mul(&self.alpha).add_scalar(self.hp.mean_constant);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&c)
            .ok_or(Error::NumericalSingularity { jitter: self.chol.jitter })?;
        let var = DVector::from_iterator(
            x_star.nrows(),
            v.column_iter().map(|col| (self.hp.signal_variance - col.norm_squared()).max(0.0)),
        );
        Ok((mean, var))
    }

    /// Joint over `(f, df/dz, df/dt, d2f/dz2)` at each selected point.
    pub fn joint_state_derivatives(&self, x_sel: &DMatrix<f64>) -> Result<GaussianBlock> {
        self.joint(x_sel, &RICHARDS_DERIVATIVES)
    }
}

pub fn predictive_distribution(
    data: &Dataset,
    hp: &GpHyperparams,
    x_star: &DMatrix<f64>,
) -> Result<GaussianBlock> {
    GpModel::new(data, hp.clone())?.predict(x_star)
}

pub fn joint_state_derivative_distribution(
    data: &Dataset,
    hp: &GpHyperparams,
    x_sel: &DMatrix<f64>,
) -> Result<GaussianBlock> {
    if x_sel.ncols() != 2 {
        return Err(Error::InvalidArgument("selected points must be (z, t) pairs".into()));
    }
    GpModel::new(data, hp.clone())?.joint_state_derivatives(x_sel)
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{Dataset, FitOptions, GpHyperparams, GpModel, MeanMode};

/// GP over theta for the objective `u`, fitted on standardized `u`.
#[derive(Clone, Debug)]
pub struct Surrogate {
    model: GpModel,
    u_mean: f64,
    u_scale: f64,
}

impl Surrogate {
    pub fn fit(thetas: &[Vec<f64>], u: &[f64], restarts: usize, noise_floor: f64, seed: u64) -> Result<Self> {
        if thetas.len() != u.len() || thetas.len() < 2 {
            return Err(Error::InvalidArgument("surrogate needs at least two evaluations".into()));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("surrogate objective values must be finite".into()));
        }
        let d = thetas[0].len();
        let n = u.len() as f64;
        let u_mean = u.iter().sum::<f64>() / n;
        let sd = (u.iter().map(|v| (v - u_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let u_scale = if sd > 0.0 { sd } else { 1.0 };
        let x = DMatrix::from_fn(thetas.len(), d, |i, k| thetas[i][k]);
        let y = DVector::from_iterator(u.len(), u.iter().map(|v| (v - u_mean) / u_scale));
        let data = Dataset::new(x, y)?;
        let mut init = GpHyperparams::initial_guess(&data);
        init.signal_variance = 1.0;
        init.noise_variance = noise_floor.max(1e-3);
        let opts = FitOptions {
            restarts,
            seed,
            mean: MeanMode::Zero,
            noise_floor_abs: noise_floor,
            ..Default::default()
        };
        let model = GpModel::fit(&data, &init, &opts)?;
        Ok(Self { model, u_mean, u_scale })
    }

    /// Predictive mean and SD of `u` at each row of `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, v) = self.model.predict_marginal(x)?;
        Ok((
            m.iter().map(|v| self.u_mean + self.u_scale * v).collect(),
            v.iter().map(|v| self.u_scale * v.sqrt()).collect(),
        ))
    }

    pub fn predict_one(&self, theta: &[f64]) -> Result<(f64, f64)> {
        let (m, s) = self.predict(&DMatrix::from_row_slice(1, theta.len(), theta))?;
        Ok((m[0], s[0]))
    }
}

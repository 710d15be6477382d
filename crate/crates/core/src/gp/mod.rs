//! Gaussian-process regression with derivative observations.
//!
//! The fitted process yields a joint Gaussian over the state and its partial
//! derivatives at arbitrary points, which is what the collocation posterior
//! is built from.

mod fit;
mod kernel;
mod likelihood;
mod model;
mod sample;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_hyperparameters, FitOptions, MeanMode};
pub use kernel::{kernel_derivative, kernel_derivative_block, kernel_eval, DerivativeOrderSpec};
pub use likelihood::{log_marginal_gradient, log_marginal_likelihood};
pub use model::{joint_state_derivative_distribution, predictive_distribution, GpModel};
pub use sample::sample_gaussian;

/// Column index of depth/elevation in a Richards design matrix.
pub const DIM_Z: usize = 0;
/// Column index of time in a Richards design matrix.
pub const DIM_T: usize = 1;

/// Design matrix and noisy responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "design has {} rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite entries".into()));
        }
        Ok(Self { x, y })
    }

    /// Builds a two-column `(z, t)` dataset from parallel slices.
    pub fn from_columns(z: &[f64], t: &[f64], y: &[f64]) -> Result<Self> {
        if z.len() != t.len() {
            return Err(Error::InvalidArgument("z and t lengths differ".into()));
        }
        let mut x = DMatrix::zeros(z.len(), 2);
        for i in 0..z.len() {
            x[(i, DIM_Z)] = z[i];
            x[(i, DIM_T)] = t[i];
        }
        Self::new(x, DVector::from_column_slice(y))
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().cloned().collect()
    }

    pub fn sample_variance(&self) -> f64 {
        sample_variance(self.y.as_slice())
    }

    pub fn mean(&self) -> f64 {
        self.y.mean()
    }
}

pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
}

/// Kernel hyperparameters in physical units plus the constant mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub mean_constant: f64,
}

impl GpHyperparams {
    /// Data-scaled starting point: length scales a fifth of each input range,
    /// signal variance the response variance, noise a tenth of it, and the
    /// sample mean as the constant.
    pub fn initial_guess(data: &Dataset) -> Self {
        let var = data.sample_variance().max(1e-12);
        let length_scales = (0..data.dim())
            .map(|d| {
                let c = data.x.column(d);
                let r = c.max() - c.min();
                if r > 0.0 { 0.2 * r } else { 1.0 }
            })
            .collect();
        Self {
            length_scales,
            signal_variance: var,
            noise_variance: 0.1 * var,
            mean_constant: data.mean(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.length_scales.iter().all(|l| l.is_finite() && *l > 0.0)
            && self.signal_variance.is_finite()
            && self.signal_variance > 0.0
            && self.noise_variance.is_finite()
            && self.noise_variance >= 0.0
            && self.mean_constant.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid GP hyperparameters {self:?}")))
        }
    }

    /// `(log l_1, .., log l_m, log sigma_s^2, log sigma_y^2)`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.length_scales.iter().map(|l| l.ln()).collect();
        z.push(self.signal_variance.ln());
        z.push(self.noise_variance.ln());
        z
    }

    pub fn from_log(zeta: &[f64], mean_constant: f64) -> Self {
        let m = zeta.len() - 2;
        Self {
            length_scales: zeta[..m].iter().map(|v| v.exp()).collect(),
            signal_variance: zeta[m].exp(),
            noise_variance: zeta[m + 1].exp(),
            mean_constant,
        }
    }

    /// Plain-text `key = value` serialization for two-input (z, t) models.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let names = ["length_scale_z", "length_scale_t"];
        for (i, l) in self.length_scales.iter().enumerate() {
            match names.get(i) {
                Some(name) => out.push_str(&format!("{name} = {l:.15e}\n")),
                None => out.push_str(&format!("length_scale_{i} = {l:.15e}\n")),
            }
        }
        out.push_str(&format!("signal_variance = {:.15e}\n", self.signal_variance));
        out.push_str(&format!("noise_variance = {:.15e}\n", self.noise_variance));
        out.push_str(&format!("mean_constant = {:.15e}\n", self.mean_constant));
        out
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut ls: Vec<(usize, f64)> = Vec::new();
        let (mut sv, mut nv, mut mc) = (None, None, None);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got {line:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in {line:?}")))?;
            match k.trim() {
                "length_scale_z" => ls.push((0, v)),
                "length_scale_t" => ls.push((1, v)),
                "signal_variance" => sv = Some(v),
                "noise_variance" => nv = Some(v),
                "mean_constant" => mc = Some(v),
                other => {
                    let idx = other
                        .strip_prefix("length_scale_")
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::Parse(format!("unknown key {other:?}")))?;
                    ls.push((idx, v));
                }
            }
        }
        ls.sort_by_key(|(i, _)| *i);
        if ls.iter().enumerate().any(|(i, (j, _))| i != *j) {
            return Err(Error::Parse("length scales are not contiguous".into()));
        }
        let hp = Self {
            length_scales: ls.into_iter().map(|(_, v)| v).collect(),
            signal_variance: sv.ok_or_else(|| Error::Parse("missing signal_variance".into()))?,
            noise_variance: nv.ok_or_else(|| Error::Parse("missing noise_variance".into()))?,
            mean_constant: mc.unwrap_or(0.0),
        };
        hp.validate()?;
        Ok(hp)
    }
}

/// Which partial derivative an entry of a joint block refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Derivative {
    pub order: u8,
    pub dim: usize,
}

impl Derivative {
    pub const VALUE: Derivative = Derivative { order: 0, dim: 0 };
    pub const fn first(dim: usize) -> Self {
        Derivative { order: 1, dim }
    }
    pub const fn second(dim: usize) -> Self {
        Derivative { order: 2, dim }
    }
}

/// The four quantities entering the Richards operator: `f, df/dz, df/dt, d2f/dz2`.
pub const RICHARDS_DERIVATIVES: [Derivative; 4] = [
    Derivative::VALUE,
    Derivative::first(DIM_Z),
    Derivative::first(DIM_T),
    Derivative::second(DIM_Z),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    pub point: usize,
    pub derivative: Derivative,
}

/// Mean and covariance of a joint Gaussian over states and derivatives.
#[derive(Clone, Debug)]
pub struct GaussianBlock {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub labels: Vec<Label>,
}

impl GaussianBlock {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn index_of(&self, label: Label) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    /// Sub-block restricted to the given entry indices.
    pub fn select(&self, idx: &[usize]) -> GaussianBlock {
        let k = idx.len();
        GaussianBlock {
            mean: DVector::from_iterator(k, idx.iter().map(|&i| self.mean[i])),
            covariance: DMatrix::from_fn(k, k, |a, b| self.covariance[(idx[a], idx[b])]),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

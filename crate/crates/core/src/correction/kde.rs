use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

use super::importance::effective_sample_size;

/// How the Gaussian kernel bandwidth is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Weighted Scott rule `h_k = sd_w,k n_eff^{-1/(d+4)}`, with each `h_k`
    /// raised to at least `floor[k]`.
    Scott { floor: Vec<f64> },
    /// Explicit bandwidth matrix `H` (kernel covariance).
    Matrix(Vec<Vec<f64>>),
}

/// `sum_i w_i N(theta; theta_i, H)`.
#[derive(Clone, Debug)]
pub struct WeightedKde {
    points: Vec<DVector<f64>>,
    log_weights: Vec<f64>,
    h: DMatrix<f64>,
    l: DMatrix<f64>,
    log_norm: f64,
}

impl WeightedKde {
    pub fn new(samples: &[Vec<f64>], weights: &[f64], bandwidth: &Bandwidth) -> Result<Self> {
        if samples.is_empty() || samples.len() != weights.len() {
            return Err(Error::InvalidArgument("KDE needs matching samples and weights".into()));
        }
        let d = samples[0].len();
        if d == 0 || samples.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidArgument("KDE samples differ in dimension".into()));
        }
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("KDE needs non-negative weights with positive sum".into()));
        }
        let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
        let h = match bandwidth {
            Bandwidth::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidBandwidth(format!("expected a {d}x{d} matrix")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
            Bandwidth::Scott { floor } => {
                let n_eff = effective_sample_size(&w);
                let factor = n_eff.powf(-1.0 / (d as f64 + 4.0));
                let mut diag = vec![0.0; d];
                for (k, dk) in diag.iter_mut().enumerate() {
                    let mean: f64 = samples.iter().zip(&w).map(|(s, w)| w * s[k]).sum();
                    let var: f64 = samples.iter().zip(&w).map(|(s, w)| w * (s[k] - mean).powi(2)).sum();
                    let hk = (var.sqrt() * factor).max(floor.get(k).copied().unwrap_or(0.0));
                    *dk = hk * hk;
                }
                DMatrix::from_diagonal(&DVector::from_vec(diag))
            }
        };
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBandwidth("non-finite entries".into()));
        }
        let chol = h
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidBandwidth("bandwidth matrix is not positive definite".into()))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        let (points, log_weights) = samples
            .iter()
            .zip(&w)
            .filter(|(_, w)| **w > 0.0)
            .map(|(s, w)| (DVector::from_column_slice(s), w.ln()))
            .unzip();
        Ok(Self {
            points,
            log_weights,
            h,
            l,
            log_norm,
        })
    }

    pub fn bandwidth(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let x = DVector::from_column_slice(theta);
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.log_weights)
            .map(|(p, lw)| {
                let r = self
                    .l
                    .solve_lower_triangular(&(&x - p))
                    .map_or(f64::INFINITY, |v| v.norm_squared());
                lw + self.log_norm - 0.5 * r
            })
            .collect();
        log_sum_exp(&terms)
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        self.log_density(theta).exp()
    }
}

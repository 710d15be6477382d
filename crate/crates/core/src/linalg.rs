//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter schedule: first attempt is exact, then
/// `1e-10 * max_diag`, escalating by 10x up to `1e-4 * max_diag`.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// A Cholesky factor together with the jitter that was needed to obtain it.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    pub fn log_det(&self) -> f64 {
        let l = self.factor.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    /// Solves `L x = b` for the lower factor only.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let l = self.factor.l_dirty();
        let n = b.len();
        let mut x = b.clone();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= l[(i, j)] * x[j];
            }
            x[i] = acc / l[(i, i)];
        }
        x
    }
}

pub fn max_diagonal(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Cholesky with the escalating diagonal jitter policy.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<JitteredCholesky> {
    if let Some(factor) = Cholesky::new(m.clone()) {
        return Ok(JitteredCholesky { factor, jitter: 0.0 });
    }
    let scale = max_diagonal(m).max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut jm = m.clone();
        for i in 0..jm.nrows() {
            jm[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::new(jm) {
            return Ok(JitteredCholesky { factor, jitter });
        }
        rel *= 10.0;
    }
    Err(Error::NumericalSingularity {
        jitter: JITTER_MAX * scale,
    })
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `log(sum(exp(v)))` computed stably. Returns `-inf` for empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

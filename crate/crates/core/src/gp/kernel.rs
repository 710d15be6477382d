//! Squared-exponential (Gaussian) kernel and its closed-form partial
//! derivatives up to second order in each argument.

use nalgebra::DMatrix;

use super::GpHyperparams;
use crate::error::{Error, Result};

/// Orders and dimensions of a mixed partial derivative
/// `d^{q+p} k(x_i, x_j) / dx_{i,e}^q dx_{j,d}^p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DerivativeOrderSpec {
    pub left_order: u8,
    pub left_dim: usize,
    pub right_order: u8,
    pub right_dim: usize,
}

impl DerivativeOrderSpec {
    pub const fn new(left_order: u8, left_dim: usize, right_order: u8, right_dim: usize) -> Self {
        Self {
            left_order,
            left_dim,
            right_order,
            right_dim,
        }
    }

    pub const VALUE: DerivativeOrderSpec = DerivativeOrderSpec::new(0, 0, 0, 0);

    fn unsupported(&self) -> Error {
        Error::UnsupportedDerivative {
            left_order: self.left_order,
            left_dim: self.left_dim,
            right_order: self.right_order,
            right_dim: self.right_dim,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let dims_ok = (self.left_order == 0 || self.left_dim < m)
            && (self.right_order == 0 || self.right_dim < m);
        let orders_ok = match (self.left_order, self.right_order) {
            (q, p) if q > 2 || p > 2 => false,
            (2, 2) => self.left_dim == self.right_dim,
            _ => true,
        };
        if dims_ok && orders_ok {
            Ok(())
        } else {
            Err(self.unsupported())
        }
    }
}

#[inline]
fn squared_exponential(diff: &[f64], length_scales: &[f64], signal_variance: f64) -> f64 {
    let r2: f64 = diff
        .iter()
        .zip(length_scales)
        .map(|(d, l)| (d / l).powi(2))
        .sum();
    signal_variance * (-0.5 * r2).exp()
}

/// Multiplier `D` such that the derivative equals `D * k(x_i, x_j)`, with
/// `diff = x_i - x_j`. `spec` must already be validated.
#[inline]
pub(crate) fn derivative_factor(spec: &DerivativeOrderSpec, diff: &[f64], ls: &[f64]) -> f64 {
    let (e, d) = (spec.left_dim, spec.right_dim);
    match (spec.left_order, spec.right_order) {
        (0, 0) => 1.0,
        (0, 1) => diff[d] / (ls[d] * ls[d]),
        (1, 0) => -diff[e] / (ls[e] * ls[e]),
        (1, 1) => {
            let delta = if e == d { 1.0 } else { 0.0 };
            (delta - diff[d] * diff[e] / (ls[d] * ls[d])) / (ls[e] * ls[e])
        }
        (0, 2) => {
            let l2 = ls[d] * ls[d];
            (diff[d] * diff[d] / l2 - 1.0) / l2
        }
        (2, 0) => {
            let l2 = ls[e] * ls[e];
            (diff[e] * diff[e] / l2 - 1.0) / l2
        }
        (1, 2) => {
            let delta = if e == d { 1.0 } else { 0.0 };
            let ld2 = ls[d] * ls[d];
            diff[e] / (ls[e] * ls[e] * ld2) * (2.0 * delta + 1.0 - diff[d] * diff[d] / ld2)
        }
        (2, 1) => {
            // Swapping the roles of the two arguments flips the sign of the
            // odd-order factor.
            let delta = if e == d { 1.0 } else { 0.0 };
            let le2 = ls[e] * ls[e];
            -diff[d] / (ls[d] * ls[d] * le2) * (2.0 * delta + 1.0 - diff[e] * diff[e] / le2)
        }
        (2, 2) => {
            let l2 = ls[d] * ls[d];
            let r = diff[d] * diff[d] / l2;
            (3.0 - 6.0 * r + r * r) / (l2 * l2)
        }
        _ => unreachable!("derivative spec validated before use"),
    }
}

fn check_point(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::InvalidArgument(format!(
            "point has {} coordinates, expected {m}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite kernel input".into()));
    }
    Ok(())
}

pub fn kernel_eval(xi: &[f64], xj: &[f64], hp: &GpHyperparams) -> Result<f64> {
    kernel_derivative(DerivativeOrderSpec::VALUE, xi, xj, hp)
}

pub fn kernel_derivative(
    spec: DerivativeOrderSpec,
    xi: &[f64],
    xj: &[f64],
    hp: &GpHyperparams,
) -> Result<f64> {
    let m = hp.length_scales.len();
    hp.validate()?;
    check_point(xi, m)?;
    check_point(xj, m)?;
    spec.validate(m)?;
    let diff: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| a - b).collect();
    let k = squared_exponential(&diff, &hp.length_scales, hp.signal_variance);
    Ok(k * derivative_factor(&spec, &diff, &hp.length_scales))
}

/// Matrix with entry `(i, j)` equal to the requested derivative of
/// `k(x_a[i], x_b[j])`.
pub fn kernel_derivative_block(
    spec: DerivativeOrderSpec,
    xa: &DMatrix<f64>,
    xb: &DMatrix<f64>,
    hp: &GpHyperparams,
) -> Result<DMatrix<f64>> {
    let m = hp.length_scales.len();
    hp.validate()?;
    if xa.ncols() != m || xb.ncols() != m {
        return Err(Error::InvalidArgument(format!(
            "design matrices must have {m} columns"
        )));
    }
    if xa.iter().chain(xb.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite kernel input".into()));
    }
    spec.validate(m)?;
    Ok(block_unchecked(
        &spec,
        xa,
        xb,
        &hp.length_scales,
        hp.signal_variance,
    ))
}

pub(crate) fn block_unchecked(
    spec: &DerivativeOrderSpec,
    xa: &DMatrix<f64>,
    xb: &DMatrix<f64>,
    ls: &[f64],
    signal_variance: f64,
) -> DMatrix<f64> {
    let m = ls.len();
    let mut diff = vec![0.0; m];
    DMatrix::from_fn(xa.nrows(), xb.nrows(), |i, j| {
        for d in 0..m {
            diff[d] = xa[(i, d)] - xb[(j, d)];
        }
        squared_exponential(&diff, ls, signal_variance) * derivative_factor(spec, &diff, ls)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(ls: &[f64], s2: f64) -> GpHyperparams {
        GpHyperparams {
            length_scales: ls.to_vec(),
            signal_variance: s2,
            noise_variance: 0.0,
            mean_constant: 0.0,
        }
    }

    #[test]
    fn zero_distance_gives_signal_variance() {
        let v = kernel_eval(&[0.3, 7.0], &[0.3, 7.0], &hp(&[1.0, 2.0], 2.5)).unwrap();
        assert_eq!(v, 2.5);
    }

    #[test]
    fn half_value_distance() {
        let r = (2.0 * 2f64.ln()).sqrt();
        let v = kernel_eval(&[0.0], &[r], &hp(&[1.0], 1.0)).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn anisotropic_exponent() {
        let v = kernel_eval(&[1.0, 2.0], &[0.0, 0.0], &hp(&[1.0, 2.0], 1.0)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(kernel_eval(&[f64::NAN], &[0.0], &hp(&[1.0], 1.0)).is_err());
    }

    #[test]
    fn closed_form_values_at_coincident_points() {
        let h = hp(&[2.0], 1.0);
        let d01 = kernel_derivative(DerivativeOrderSpec::new(0, 0, 1, 0), &[0.4], &[0.4], &h).unwrap();
        assert_eq!(d01, 0.0);
        let d11 = kernel_derivative(DerivativeOrderSpec::new(1, 0, 1, 0), &[0.4], &[0.4], &h).unwrap();
        assert!((d11 - 0.25).abs() < 1e-15);
        let h1 = hp(&[1.0], 1.0);
        let d22 = kernel_derivative(DerivativeOrderSpec::new(2, 0, 2, 0), &[0.4], &[0.4], &h1).unwrap();
        assert!((d22 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_orders_rejected() {
        let h = hp(&[1.0, 1.0], 1.0);
        for spec in [
            DerivativeOrderSpec::new(3, 0, 0, 0),
            DerivativeOrderSpec::new(2, 0, 2, 1),
            DerivativeOrderSpec::new(0, 0, 1, 5),
        ] {
            assert!(matches!(
                kernel_derivative(spec, &[0.0, 0.0], &[1.0, 1.0], &h),
                Err(Error::UnsupportedDerivative { .. })
            ));
        }
    }

    #[test]
    fn zero_zero_block_is_kernel_matrix() {
        let h = hp(&[0.7, 1.3], 1.7);
        let xa = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.5, -0.2]);
        let xb = DMatrix::from_row_slice(3, 2, &[0.3, 0.3, 1.0, 2.0, -1.0, 0.0]);
        let b = kernel_derivative_block(DerivativeOrderSpec::VALUE, &xa, &xb, &h).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let xi: Vec<f64> = xa.row(i).iter().cloned().collect();
                let xj: Vec<f64> = xb.row(j).iter().cloned().collect();
                assert_eq!(b[(i, j)], kernel_eval(&xi, &xj, &h).unwrap());
            }
        }
    }
}

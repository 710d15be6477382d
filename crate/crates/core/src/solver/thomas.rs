use crate::error::{Error, Result};

/// Solves the tridiagonal system with sub-diagonal `a`, diagonal `b`,
/// super-diagonal `c` and right-hand side `d`.
pub fn thomas_solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if n == 0 || d.len() != n || a.len() + 1 != n || c.len() + 1 != n {
        return Err(Error::InvalidArgument(format!(
            "tridiagonal lengths a={}, b={}, c={}, d={} are inconsistent",
            a.len(),
            b.len(),
            c.len(),
            d.len()
        )));
    }
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut x = vec![0.0; n];
    thomas_into(a, b, c, d, &mut cp, &mut dp, &mut x)?;
    Ok(x)
}

/// Allocation-free core of [`thomas_solve`]; lengths are assumed consistent.
pub(crate) fn thomas_into(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: &[f64],
    cp: &mut [f64],
    dp: &mut [f64],
    x: &mut [f64],
) -> Result<()> {
    let n = b.len();
    let pivot_ok = |p: f64| p != 0.0 && p.is_finite();
    if !pivot_ok(b[0]) {
        return Err(Error::SingularSystem { row: 0 });
    }
    cp[0] = if n > 1 { c[0] / b[0] } else { 0.0 };
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let p = b[i] - a[i - 1] * cp[i - 1];
        if !pivot_ok(p) {
            return Err(Error::SingularSystem { row: i });
        }
        if i < n - 1 {
            cp[i] = c[i] / p;
        }
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / p;
    }
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(())
}

//! Limited-memory BFGS with optional box constraints.
//!
//! Bounds are handled by projecting trial points onto the box and freezing
//! coordinates whose gradient pushes against an active bound. This is the
//! projected-gradient flavour of L-BFGS-B; the generalized Cauchy point step
//! is omitted, which is adequate for the low-dimensional problems here
//! (GP hyperparameters, two sink parameters).

use std::collections::VecDeque;

/// Objective returning value and gradient, or `None` when the point is not
/// evaluable (e.g. Cholesky failure).
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    fn eval(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self(x)
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    /// Stop when the relative decrease over one iteration falls below this.
    pub f_rel_tol: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            memory: 8,
            grad_tol: 1e-8,
            f_rel_tol: 1e-12,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    GradientConverged,
    ValueConverged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        matches!(self.status, Status::GradientConverged | Status::ValueConverged)
    }
}

fn project(x: &mut [f64], bounds: Option<&[(f64, f64)]>) {
    if let Some(b) = bounds {
        for (xi, &(lo, hi)) in x.iter_mut().zip(b) {
            *xi = xi.clamp(lo, hi);
        }
    }
}

fn free_mask(x: &[f64], g: &[f64], bounds: Option<&[(f64, f64)]>) -> Vec<bool> {
    match bounds {
        None => vec![true; x.len()],
        Some(b) => x
            .iter()
            .zip(g)
            .zip(b)
            .map(|((&xi, &gi), &(lo, hi))| !((xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0)))
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn masked_norm(g: &[f64], mask: &[bool]) -> f64 {
    g.iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `f` from `x0`. Returns `None` only if `f(x0)` is not evaluable.
pub fn minimize<O: Objective>(
    f: &mut O,
    x0: &[f64],
    bounds: Option<&[(f64, f64)]>,
    opts: &LbfgsOptions,
) -> Option<Minimum> {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let (mut fx, mut g) = f.eval(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    for iter in 0..opts.max_iter {
        let mask = free_mask(&x, &g, bounds);
        let gnorm = masked_norm(&g, &mask);
        if gnorm < opts.grad_tol {
            return Some(Minimum {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
                evaluations,
                status: Status::GradientConverged,
            });
        }

        // Two-loop recursion on the free subspace.
        let mut q: Vec<f64> = g
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let mut d: Vec<f64> = q
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { -v } else { 0.0 })
            .collect();
        if dot(&d, &g) >= 0.0 {
            history.clear();
            d = g
                .iter()
                .zip(&mask)
                .map(|(&v, &m)| if m { -v } else { 0.0 })
                .collect();
        }

        let mut step = if history.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            project(&mut xn, bounds);
            let moved: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if decrease >= 0.0 && moved.iter().all(|v| *v == 0.0) {
                break;
            }
            evaluations += 1;
            if let Some((fn_, gn)) = f.eval(&xn) {
                if fn_.is_finite()
                    && gn.iter().all(|v| v.is_finite())
                    && fn_ <= fx + 1e-4 * decrease
                {
                    accepted = Some((xn, fn_, gn, moved));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((xn, fn_, gn, s)) = accepted else {
            return Some(Minimum {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
                evaluations,
                status: Status::LineSearchFailed,
            });
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fn_).abs() / fx.abs().max(fn_.abs()).max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        if rel < opts.f_rel_tol {
            let mask = free_mask(&x, &g, bounds);
            return Some(Minimum {
                grad_norm: masked_norm(&g, &mask),
                x,
                value: fx,
                iterations: iter + 1,
                evaluations,
                status: Status::ValueConverged,
            });
        }
    }
    let mask = free_mask(&x, &g, bounds);
    Some(Minimum {
        grad_norm: masked_norm(&g, &mask),
        x,
        value: fx,
        iterations: opts.max_iter,
        evaluations,
        status: Status::MaxIterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let ga = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        let gb = 200.0 * (b - a * a);
        Some((v, vec![ga, gb]))
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let opts = LbfgsOptions {
            max_iter: 500,
            ..Default::default()
        };
        let m = minimize(&mut rosenbrock, &[-1.2, 1.0], None, &opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5, "{m:?}");
        assert!((m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn respects_bounds() {
        let mut f = |x: &[f64]| Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]));
        let bounds = [(0.0, 2.0), (0.0, 2.0)];
        let m = minimize(&mut f, &[1.0, 1.0], Some(&bounds), &LbfgsOptions::default()).unwrap();
        assert!((m.x[0] - 2.0).abs() < 1e-10);
        assert!(m.x[1].abs() < 1e-10);
        assert!(m.converged());
    }

    #[test]
    fn unevaluable_start_returns_none() {
        let mut f = |_: &[f64]| None;
        assert!(minimize(&mut f, &[0.0], None, &LbfgsOptions::default()).is_none());
    }

    #[test]
    fn stationary_start_stays_put() {
        let mut f = |x: &[f64]| Some((x[0] * x[0], vec![2.0 * x[0]]));
        let m = minimize(&mut f, &[0.0], None, &LbfgsOptions::default()).unwrap();
        assert_eq!(m.x, vec![0.0]);
        assert_eq!(m.iterations, 0);
    }
}

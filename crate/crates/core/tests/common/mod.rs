//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use gpcinfer::correction::{importance_weights, is_estimate};
use gpcinfer::gp::{kernel_derivative, log_marginal_gradient, log_marginal_likelihood, Dataset, DerivativeOrderSpec, GpHyperparams, DIM_T, DIM_Z};
use gpcinfer::solver::{thomas_solve, SolutionField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest error of each closed-form kernel derivative against a central
/// difference of the next-lower analytic derivative, relative to the
/// derivative's natural scale `sigma^2 / prod l^order`.
pub struct KernelFdReport {
    pub name: &'static str,
    pub max_rel_err: f64,
}

fn kernel_fd_one(
    target: DerivativeOrderSpec,
    lower: DerivativeOrderSpec,
    step_left: Option<usize>,
    step_right: Option<usize>,
    xi: &[f64],
    xj: &[f64],
    hp: &GpHyperparams,
) -> f64 {
    let analytic = kernel_derivative(target, xi, xj, hp).unwrap();
    let dim = step_left.or(step_right).unwrap();
    let h = 1e-4 * hp.length_scales[dim];
    let shifted = |s: f64| {
        let (mut a, mut b) = (xi.to_vec(), xj.to_vec());
        if let Some(d) = step_left {
            a[d] += s;
        }
        if let Some(d) = step_right {
            b[d] += s;
        }
        kernel_derivative(lower, &a, &b, hp).unwrap()
    };
    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    let l = &hp.length_scales;
    let mut scale = hp.signal_variance;
    for (order, d) in [(target.left_order, target.left_dim), (target.right_order, target.right_dim)] {
        scale /= l[d].powi(order as i32);
    }
    (analytic - fd).abs() / scale
}

pub fn kernel_fd_check(seed: u64, pairs: usize) -> Vec<KernelFdReport> {
    let (d, e) = (DIM_Z, DIM_T);
    let s = DerivativeOrderSpec::new;
    let cases: [(&'static str, DerivativeOrderSpec, DerivativeOrderSpec, Option<usize>, Option<usize>); 7] = [
        ("dk/dxj_d", s(0, 0, 1, d), DerivativeOrderSpec::VALUE, None, Some(d)),
        ("d2k/dxi_e dxj_d", s(1, e, 1, d), s(0, 0, 1, d), Some(e), None),
        ("d2k/dxi_d dxj_d", s(1, d, 1, d), s(0, 0, 1, d), Some(d), None),
        ("d2k/dxj_d2", s(0, 0, 2, d), s(0, 0, 1, d), None, Some(d)),
        ("d3k/dxi_e dxj_d2", s(1, e, 2, d), s(0, 0, 2, d), Some(e), None),
        ("d3k/dxi_d dxj_d2", s(1, d, 2, d), s(0, 0, 2, d), Some(d), None),
        ("d4k/dxi_d2 dxj_d2", s(2, d, 2, d), s(1, d, 2, d), Some(d), None),
    ];
    let mut r = rng(seed);
    let mut worst = vec![0.0f64; cases.len()];
    for _ in 0..pairs {
        let hp = GpHyperparams {
            length_scales: vec![r.random_range(0.2..1.0), r.random_range(0.2..1.0)],
            signal_variance: r.random_range(0.5..2.0),
            noise_variance: 1e-3,
            mean_constant: 0.0,
        };
        let xi = [r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
        let xj = [r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
        for (k, (_, target, lower, sl, sr)) in cases.iter().enumerate() {
            worst[k] = worst[k].max(kernel_fd_one(*target, *lower, *sl, *sr, &xi, &xj, &hp));
        }
    }
    cases
        .iter()
        .zip(worst)
        .map(|(c, w)| KernelFdReport {
            name: c.0,
            max_rel_err: w,
        })
        .collect()
}

pub fn random_dataset(r: &mut ChaCha8Rng, n: usize) -> Dataset {
    let z: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
    let t: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = z
        .iter()
        .zip(&t)
        .map(|(a, b)| (3.0 * a).sin() + b * b + 0.05 * r.random_range(-1.0..1.0))
        .collect();
    Dataset::from_columns(&z, &t, &y).unwrap()
}

/// Worst relative error `|g - fd| / max(1, |fd|)` of the log marginal
/// likelihood gradient over `n_zeta` random log-hyperparameter vectors.
pub fn lml_gradient_fd_check(seed: u64, n_zeta: usize) -> f64 {
    let mut r = rng(seed);
    let data = random_dataset(&mut r, 25);
    let mut worst = 0.0f64;
    for _ in 0..n_zeta {
        let zeta = vec![
            r.random_range(-2.0..0.5),
            r.random_range(-2.0..0.5),
            r.random_range(-1.0..1.0),
            r.random_range(-6.0..-1.0),
        ];
        let mean = r.random_range(-0.5..0.5);
        let g = log_marginal_gradient(&data, &zeta, mean).unwrap();
        for k in 0..zeta.len() {
            let h = 1e-5;
            let at = |s: f64| {
                let mut z = zeta.clone();
                z[k] += s;
                log_marginal_likelihood(&data, &GpHyperparams::from_log(&z, mean)).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            worst = worst.max((g[k] - fd).abs() / fd.abs().max(1.0));
        }
    }
    worst
}

/// Worst error of the Thomas solve against a dense LU solve, relative to
/// `max(1, |x|_inf)`, over random diagonally dominant systems.
pub fn thomas_vs_dense(seed: u64, systems: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..systems {
        let n = r.random_range(1..120);
        let a: Vec<f64> = (1..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (1..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| {
                let off = if i > 0 { a[i - 1].abs() } else { 0.0 } + if i + 1 < n { c[i].abs() } else { 0.0 };
                (off + r.random_range(0.1..2.0)) * if r.random_bool(0.5) { 1.0 } else { -1.0 }
            })
            .collect();
        let d: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let x = thomas_solve(&a, &b, &c, &d).unwrap();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = b[i];
            if i > 0 {
                m[(i, i - 1)] = a[i - 1];
            }
            if i + 1 < n {
                m[(i, i + 1)] = c[i];
            }
        }
        let xd = m.lu().solve(&DVector::from_vec(d)).unwrap();
        let norm = xd.amax().max(1.0);
        for i in 0..n {
            worst = worst.max((x[i] - xd[i]).abs() / norm);
        }
    }
    worst
}

/// Linear-Gaussian conjugate model: `theta ~ N(0, s0^2)`, `y_k ~ N(theta, 1)`.
pub struct ConjugateToy {
    pub y: Vec<f64>,
    pub s0: f64,
}

impl ConjugateToy {
    pub fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        let theta: f64 = Normal::new(0.0, 2.0).unwrap().sample(&mut r);
        let y = (0..8).map(|_| theta + Normal::new(0.0, 1.0).unwrap().sample(&mut r)).collect();
        Self { y, s0: 2.0 }
    }

    /// Closed-form posterior mean and variance.
    pub fn posterior(&self) -> (f64, f64) {
        let prec = 1.0 / (self.s0 * self.s0) + self.y.len() as f64;
        (self.y.iter().sum::<f64>() / prec, 1.0 / prec)
    }

    /// Unnormalized log posterior.
    pub fn log_true(&self, theta: f64) -> f64 {
        -0.5 * theta * theta / (self.s0 * self.s0) - 0.5 * self.y.iter().map(|y| (y - theta).powi(2)).sum::<f64>()
    }

    /// Self-normalized IS with a deliberately misplaced Gaussian proposal,
    /// standing in for the collocation posterior. Returns the estimate and
    /// its delta-method standard error.
    pub fn is_posterior_mean(&self, n_t: usize, seed: u64) -> (f64, f64) {
        let (m, v) = self.posterior();
        let (qm, qs) = (m + 0.5 * v.sqrt(), 1.6 * v.sqrt());
        let q = Normal::new(qm, qs).unwrap();
        let mut r = rng(seed);
        let thetas: Vec<Vec<f64>> = (0..n_t).map(|_| vec![q.sample(&mut r)]).collect();
        let log_true: Vec<f64> = thetas.iter().map(|t| self.log_true(t[0])).collect();
        let log_q: Vec<f64> = thetas.iter().map(|t| -0.5 * ((t[0] - qm) / qs).powi(2)).collect();
        let w = importance_weights(&log_true, &log_q).unwrap();
        let est = is_estimate(|t| vec![t[0]], &thetas, &w)[0];
        let se = thetas
            .iter()
            .zip(&w)
            .map(|(t, wi)| (wi * (t[0] - est)).powi(2))
            .sum::<f64>()
            .sqrt();
        (est, se)
    }
}

/// Outcome of the conjugate-toy IS oracle over many seeds.
pub struct IsOracleReport {
    pub mean_err_small: f64,
    pub mean_err_large: f64,
    /// `|mean estimate - exact| / (sd of estimates / sqrt(seeds))` at the
    /// large sample size.
    pub z_large: f64,
    /// Median delta-method SE at the large sample size.
    pub median_se_large: f64,
}

pub fn is_conjugate_oracle(seeds: u64, n_small: usize, n_large: usize) -> IsOracleReport {
    let toy = ConjugateToy::new(7);
    let (exact, _) = toy.posterior();
    let mut err_s = 0.0;
    let mut err_l = 0.0;
    let mut est_l = Vec::new();
    let mut se_l = Vec::new();
    for s in 0..seeds {
        let (a, _) = toy.is_posterior_mean(n_small, 2 * s);
        let (b, se) = toy.is_posterior_mean(n_large, 2 * s + 1);
        err_s += (a - exact).abs();
        err_l += (b - exact).abs();
        est_l.push(b);
        se_l.push(se);
    }
    let n = seeds as f64;
    let mean = est_l.iter().sum::<f64>() / n;
    let sd = (est_l.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    se_l.sort_by(f64::total_cmp);
    IsOracleReport {
        mean_err_small: err_s / n,
        mean_err_large: err_l / n,
        z_large: (mean - exact).abs() / (sd / n.sqrt()),
        median_se_large: se_l[se_l.len() / 2],
    }
}

/// Physics diagnostics of one forward solve.
pub struct PhysicsReport {
    pub max_step_imbalance: f64,
    pub cumulative_imbalance: f64,
    pub contents_in_range: bool,
    pub halvings: usize,
    pub max_picard_iterations: usize,
}

pub fn physics_report(field: &SolutionField, profile: &gpcinfer::richards::SoilProfile) -> PhysicsReport {
    let mut ok = true;
    for (i, z) in field.z.iter().enumerate() {
        let soil = profile.layer_at(z.abs()).unwrap();
        for j in 0..field.t.len() {
            let f = field.f[(i, j)];
            ok &= f >= soil.c_r && f <= soil.c_s;
        }
    }
    PhysicsReport {
        max_step_imbalance: field.stats.max_step_relative_imbalance,
        cumulative_imbalance: field.stats.cumulative_relative_imbalance(),
        contents_in_range: ok,
        halvings: field.stats.halvings,
        max_picard_iterations: field.stats.max_iterations_in_step,
    }
}

impl PhysicsReport {
    pub fn passes(&self) -> bool {
        self.max_step_imbalance < 1e-3 && self.cumulative_imbalance < 1e-2 && self.contents_in_range && self.halvings == 0
    }
}

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use gpcinfer::gp::{
    fit_hyperparameters, kernel_derivative, kernel_derivative_block, kernel_eval, sample_gaussian, Dataset,
    DerivativeOrderSpec, FitOptions, GpHyperparams, GpModel, MeanMode, RICHARDS_DERIVATIVES,
};
use gpcinfer::optim::{minimize, LbfgsOptions};
use gpcinfer::solver::thomas_solve;

#[test]
fn kernel_derivatives_match_finite_differences() {
    for r in common::kernel_fd_check(11, 100) {
        assert!(r.max_rel_err < 1e-6, "{}: {:e}", r.name, r.max_rel_err);
    }
}

#[test]
fn lml_gradient_matches_finite_differences() {
    let err = common::lml_gradient_fd_check(12, 20);
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn thomas_matches_dense_lu() {
    let err = common::thomas_vs_dense(13, 200);
    assert!(err < 1e-10, "{err:e}");
}

fn hp(l: (f64, f64), s2: f64) -> GpHyperparams {
    GpHyperparams {
        length_scales: vec![l.0, l.1],
        signal_variance: s2,
        noise_variance: 1e-4,
        mean_constant: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_bounded(
        a in prop::array::uniform2(-2.0..2.0f64),
        b in prop::array::uniform2(-2.0..2.0f64),
        l0 in 0.05..3.0f64, l1 in 0.05..3.0f64, s2 in 0.1..5.0f64,
    ) {
        let h = hp((l0, l1), s2);
        let kab = kernel_eval(&a, &b, &h).unwrap();
        let kba = kernel_eval(&b, &a, &h).unwrap();
        prop_assert_eq!(kab, kba);
        prop_assert!(kab > 0.0 && kab <= s2);
    }

    // k depends on x_i - x_j only and is even, so exchanging the points
    // together with their derivative orders leaves the value unchanged.
    #[test]
    fn swapped_derivatives_agree(
        a in prop::array::uniform2(0.0..1.0f64),
        b in prop::array::uniform2(0.0..1.0f64),
        q in 0u8..3, p in 0u8..3, e in 0usize..2, d in 0usize..2,
    ) {
        prop_assume!(!(q == 2 && p == 2 && e != d));
        let h = hp((0.3, 0.5), 1.2);
        let lhs = kernel_derivative(DerivativeOrderSpec::new(q, e, p, d), &a, &b, &h).unwrap();
        let rhs = kernel_derivative(DerivativeOrderSpec::new(p, d, q, e), &b, &a, &h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn value_block_is_symmetric_psd(n in 2usize..12, seed in 0u64..1000) {
        let mut r = common::rng(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rand::Rng::random_range(&mut r, 0.0..1.0));
        let k = kernel_derivative_block(DerivativeOrderSpec::VALUE, &x, &x, &hp((0.4, 0.4), 1.0)).unwrap();
        prop_assert!((&k - k.transpose()).amax() < 1e-15);
        let eig = k.symmetric_eigenvalues();
        prop_assert!(eig.min() > -1e-10);
    }

    #[test]
    fn thomas_residual_is_small(n in 1usize..60, seed in 0u64..1000) {
        let mut r = common::rng(seed);
        use rand::Rng;
        let a: Vec<f64> = (1..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (1..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| 2.5).collect();
        let d: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let x = thomas_solve(&a, &b, &c, &d).unwrap();
        for i in 0..n {
            let mut ax = b[i] * x[i];
            if i > 0 { ax += a[i - 1] * x[i - 1]; }
            if i + 1 < n { ax += c[i] * x[i + 1]; }
            prop_assert!((ax - d[i]).abs() < 1e-12);
        }
    }
}

fn smooth_dataset(n_side: usize) -> Dataset {
    let mut z = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    for i in 0..n_side {
        for j in 0..n_side {
            let (a, b) = (i as f64 / (n_side - 1) as f64, j as f64 / (n_side - 1) as f64);
            z.push(a);
            t.push(b);
            y.push((2.0 * a).sin() * (1.0 + 0.5 * b));
        }
    }
    Dataset::from_columns(&z, &t, &y).unwrap()
}

#[test]
fn derivative_means_recover_smooth_function() {
    let data = smooth_dataset(9);
    let opts = FitOptions {
        restarts: 3,
        seed: 1,
        mean: MeanMode::SampleMean,
        ..Default::default()
    };
    let model = GpModel::fit(&data, &GpHyperparams::initial_guess(&data), &opts).unwrap();
    let x = DMatrix::from_row_slice(2, 2, &[0.4, 0.5, 0.6, 0.3]);
    let m = model.derivative_means(&x, &RICHARDS_DERIVATIVES).unwrap();
    for k in 0..2 {
        let (a, b) = (x[(k, 0)], x[(k, 1)]);
        let truth = [
            (2.0 * a).sin() * (1.0 + 0.5 * b),
            2.0 * (2.0 * a).cos() * (1.0 + 0.5 * b),
            0.5 * (2.0 * a).sin(),
            -4.0 * (2.0 * a).sin() * (1.0 + 0.5 * b),
        ];
        let tol = [1e-3, 1e-2, 1e-2, 0.1];
        for d in 0..4 {
            assert!((m[d][k] - truth[d]).abs() < tol[d], "deriv {d}: {} vs {}", m[d][k], truth[d]);
        }
    }
}

#[test]
fn fit_does_not_decrease_likelihood_of_initial_guess() {
    let mut r = common::rng(3);
    let data = common::random_dataset(&mut r, 30);
    let init = GpHyperparams::initial_guess(&data);
    let fitted = fit_hyperparameters(&data, &init, &FitOptions::default()).unwrap();
    let l0 = gpcinfer::gp::log_marginal_likelihood(&data, &init).unwrap();
    let l1 = gpcinfer::gp::log_marginal_likelihood(&data, &fitted).unwrap();
    assert!(l1 >= l0 - 1e-9, "{l1} < {l0}");
}

#[test]
fn joint_draws_reproduce_predictive_moments() {
    let data = smooth_dataset(6);
    let model = GpModel::new(
        &data,
        GpHyperparams {
            length_scales: vec![0.4, 0.6],
            signal_variance: 1.0,
            noise_variance: 1e-2,
            mean_constant: 0.0,
        },
    )
    .unwrap();
    let x = DMatrix::from_row_slice(2, 2, &[0.33, 0.41, 0.71, 0.2]);
    let block = model.joint_state_derivatives(&x).unwrap();
    let n = 20000;
    let draws = sample_gaussian(&block, n, 5).unwrap();
    for c in 0..block.mean.len() {
        let col = draws.column(c);
        let m = col.mean();
        let v = col.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = block.covariance[(c, c)].sqrt();
        assert!((m - block.mean[c]).abs() < 5.0 * sd / (n as f64).sqrt(), "mean {c}");
        assert!((v / block.covariance[(c, c)] - 1.0).abs() < 0.06, "var {c}");
    }
}

#[test]
fn lbfgs_finds_rosenbrock_minimum() {
    let mut f = |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((v, g))
    };
    let m = minimize(&mut f, &[-1.2, 1.0], None, &LbfgsOptions::default()).unwrap();
    assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
}

#[test]
fn lbfgs_respects_bounds() {
    let mut f = |x: &[f64]| Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]));
    let m = minimize(&mut f, &[0.5, 0.5], Some(&[(0.0, 1.0), (0.0, 1.0)]), &LbfgsOptions::default()).unwrap();
    assert!((m.x[0] - 1.0).abs() < 1e-9 && m.x[1].abs() < 1e-9, "{:?}", m.x);
}

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use gpcinfer::bayes_opt::Ssre;
use gpcinfer::harness::{RunConfig, SoilPreset};
use gpcinfer::optim::LbfgsOptions;
use gpcinfer::richards::{
    feddes_alpha, head_from_water_content, hydraulic_conductivity, root_density, sink_with_gradient,
    specific_capacity, water_content_from_head, Constitutive, FeddesParams, SinkParams, SoilLayerParams,
    SoilProfile, HEAD_FLOOR,
};
use gpcinfer::solver::{Grid, Problem, SolutionField};

fn loam() -> SoilLayerParams {
    SoilLayerParams::loam(1.0)
}

proptest! {
    #[test]
    fn retention_round_trip(c in 1e-4..0.9999f64) {
        for soil in [loam(), SoilProfile::field_site().layers()[0].clone()] {
            let f = soil.c_r + c * (soil.c_s - soil.c_r);
            let h = head_from_water_content(f, &soil).unwrap();
            if h <= HEAD_FLOOR {
                continue;
            }
            let back = water_content_from_head(h, &soil);
            prop_assert!((back - f).abs() < 1e-10 * soil.c_s, "{} vs {}", back, f);
        }
    }

    #[test]
    fn capacity_is_derivative_of_retention(h in -50.0..-0.01f64) {
        let soil = loam();
        let eps = 1e-6 * h.abs();
        let fd = (water_content_from_head(h + eps, &soil) - water_content_from_head(h - eps, &soil)) / (2.0 * eps);
        let c = specific_capacity(h, &soil);
        prop_assert!((c - fd).abs() <= 1e-6 * c.abs().max(1e-12));
    }

    #[test]
    fn conductivity_is_monotone(c1 in 0.0..1.0f64, c2 in 0.0..1.0f64) {
        let soil = loam();
        let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(hydraulic_conductivity(lo, &soil) <= hydraulic_conductivity(hi, &soil));
        prop_assert!(hydraulic_conductivity(hi, &soil) <= soil.k_sat);
    }

    #[test]
    fn constitutive_derivatives_match_fd(c in 0.05..0.95f64) {
        let soil = loam();
        let f = soil.c_r + c * (soil.c_s - soil.c_r);
        let at = |f: f64| Constitutive::at(f, &soil).unwrap();
        let e = 1e-7;
        let (p, m, x) = (at(f + e), at(f - e), at(f));
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        prop_assert!(rel(x.dh_df, (p.h - m.h) / (2.0 * e)) < 1e-5);
        prop_assert!(rel(x.d2h_df2, (p.dh_df - m.dh_df) / (2.0 * e)) < 1e-5);
        prop_assert!(rel(x.dk_df, (p.k - m.k) / (2.0 * e)) < 1e-5);
    }

    #[test]
    fn feddes_is_a_fraction(h in -500.0..1.0f64) {
        let a = feddes_alpha(h, &FeddesParams::default());
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn sink_gradient_matches_fd(
        beta in 0.1..4.0f64, l_m in 0.5..4.0f64, depth in 0.0..0.3f64, frac in 0.05..1.0f64,
    ) {
        let theta = SinkParams::new(beta, l_m);
        prop_assume!(depth < 0.98 * l_m * frac);
        let (_, g) = sink_with_gradient(4e-9, depth, frac, &theta);
        let s = |b: f64, l: f64| sink_with_gradient(4e-9, depth, frac, &SinkParams::new(b, l)).0;
        let e = 1e-6;
        let fd_b = (s(beta + e, l_m) - s(beta - e, l_m)) / (2.0 * e);
        let fd_l = (s(beta, l_m + e) - s(beta, l_m - e)) / (2.0 * e);
        prop_assert!((g[0] - fd_b).abs() <= 1e-6 * fd_b.abs().max(1e-9 * 4e-9));
        prop_assert!((g[1] - fd_l).abs() <= 1e-6 * fd_l.abs().max(1e-9 * 4e-9));
    }
}

#[test]
fn feddes_breakpoints() {
    let a = FeddesParams::default();
    assert_eq!(feddes_alpha(-0.05, &a), 0.0);
    assert_eq!(feddes_alpha(-0.1, &a), 0.0);
    assert!((feddes_alpha(-0.175, &a) - 0.5).abs() < 1e-12);
    assert_eq!(feddes_alpha(-1.0, &a), 1.0);
    assert!((feddes_alpha(-77.5, &a) - 0.5).abs() < 1e-12);
    assert_eq!(feddes_alpha(-200.0, &a), 0.0);
}

/// The root density integrates to one over the rooting depth, so the total
/// uptake equals the unstressed transpiration.
#[test]
fn root_density_integrates_to_one() {
    for (beta, l) in [(0.0, 0.3), (1.5, 1.2), (3.7, 0.05), (0.3, 2.0)] {
        let n = 200_000;
        let h = l / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            sum += h / 6.0 * (root_density(a, beta, l) + 4.0 * root_density(0.5 * (a + b), beta, l) + root_density(b, beta, l));
        }
        assert!((sum - 1.0).abs() < 1e-6, "beta {beta}, L {l}: {sum}");
    }
}

fn solve(cfg: &RunConfig, theta: SinkParams) -> (Problem, SolutionField) {
    let problem = cfg.problem().unwrap();
    let field = problem.solve(&theta).unwrap();
    (problem, field)
}

#[test]
fn default_run_conserves_mass_without_halving() {
    let cfg = RunConfig::default();
    let (problem, field) = solve(&cfg, cfg.truth);
    let r = common::physics_report(&field, &problem.profile);
    assert!(r.passes(), "step {:e}, cumulative {:e}, in range {}, halvings {}", r.max_step_imbalance, r.cumulative_imbalance, r.contents_in_range, r.halvings);
    assert_eq!(field.t.len(), 91);
}

#[test]
fn layered_profile_conserves_mass() {
    let mut cfg = RunConfig::default();
    cfg.physics.soil = SoilPreset::FieldSite;
    let (problem, field) = solve(&cfg, SinkParams::new(2.0, 2.5));
    let r = common::physics_report(&field, &problem.profile);
    assert!(r.passes(), "step {:e}, cumulative {:e}, in range {}, halvings {}", r.max_step_imbalance, r.cumulative_imbalance, r.contents_in_range, r.halvings);
}

#[test]
fn solve_is_deterministic() {
    let cfg = RunConfig::default();
    let (_, a) = solve(&cfg, cfg.truth);
    let (_, b) = solve(&cfg, cfg.truth);
    assert_eq!(a, b);
}

#[test]
fn without_transpiration_the_sink_parameters_are_inert() {
    let mut cfg = RunConfig::default();
    cfg.physics.grid.days = 10.0;
    cfg.physics.transpiration = 0.0;
    let (_, a) = solve(&cfg, SinkParams::new(0.5, 1.0));
    let (_, b) = solve(&cfg, SinkParams::new(2.5, 3.5));
    assert_eq!(a.f, b.f);
}

/// Boundary fluxes act on faces half a cell outside the end nodes, so with
/// the end nodes held fixed the effective column shifts by `dz / 2` and
/// refinement converges at first order in `dz`.
#[test]
fn refinement_converges_at_first_order() {
    let theta = SinkParams::new(1.5, 3.2);
    let mut cfg = RunConfig::default();
    cfg.physics.grid.days = 20.0;
    cfg.physics.solver.tol = 1e-11;
    let f_at = |dz: f64| {
        let mut c = cfg.clone();
        c.physics.grid.dz = dz;
        let (_, field) = solve(&c, theta);
        field.interpolate(-0.05, 20.0 * 86400.0).unwrap()
    };
    let f: Vec<f64> = [0.005, 0.0025, 0.00125].iter().map(|dz| f_at(*dz)).collect();
    let ratio = (f[2] - f[1]) / (f[1] - f[0]);
    assert!((0.35..0.65).contains(&ratio), "{f:?}, ratio {ratio}");
}

/// With the states taken from a fine forward solve instead of a GP, the
/// least-squares residual estimator recovers the generating parameters.
#[test]
fn exact_states_recover_parameters() {
    let truth = SinkParams::new(1.9, 1.4);
    let mut cfg = RunConfig::default();
    cfg.physics.grid.dz = 0.0025;
    cfg.physics.grid.dt = 200.0;
    cfg.physics.solver.store_interval = 200.0;
    let (problem, field) = solve(&cfg, truth);
    let dz = cfg.physics.grid.dz;
    let dt = cfg.physics.solver.store_interval;
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for day in (30..=85).step_by(5) {
        let j = (day as f64 * 86400.0 / dt).round() as usize;
        for i in (8..field.z.len() - 8).step_by(8) {
            let f = &field.f;
            let fz = (f[(i + 1, j)] - f[(i - 1, j)]) / (2.0 * dz);
            let fzz = (f[(i + 1, j)] - 2.0 * f[(i, j)] + f[(i - 1, j)]) / (dz * dz);
            let ft = (f[(i, j + 1)] - f[(i, j - 1)]) / (2.0 * dt);
            rows.push([f[(i, j)], fz, ft, fzz]);
            pts.push([field.z[i], field.t[j]]);
        }
    }
    let omega = DMatrix::from_fn(rows.len(), 4, |r, k| rows[r][k]);
    let points = DMatrix::from_fn(pts.len(), 2, |r, k| pts[r][k]);
    let ssre = Ssre::from_states(&omega, points, &problem.profile, &problem.env).unwrap();
    let res = ssre.minimize(&[(0.75, 3.0), (1.0, 4.0)], &[1.5, 2.5], &LbfgsOptions::default()).unwrap();
    let err = [(res.theta[0] - truth.beta).abs(), (res.theta[1] - truth.l_m).abs()];
    assert!(err[0] < 1e-2 && err[1] < 1e-2, "{:?}", res.theta);
}

#[test]
fn grid_rejects_inconsistent_spacing() {
    assert!(Grid::uniform(-0.3, -0.01, 0.007, 86400.0, 400.0).is_err());
    assert!(Grid::uniform(-0.01, -0.3, 0.005, 86400.0, 400.0).is_err());
}

use gpcinfer::harness::{
    aggregate, io, plotdata, run_experiment, simulate, write_experiment, Method, ReplicateResult, RunConfig, TableRow,
};

#[test]
fn simulation_is_reproducible_from_its_seed() {
    let cfg = RunConfig::default();
    let problem = cfg.problem().unwrap();
    let (fa, da) = simulate(&cfg, &problem, 0.05, 42).unwrap();
    let (fb, db) = simulate(&cfg, &problem, 0.05, 42).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(da, db);
    let (_, dc) = simulate(&cfg, &problem, 0.05, 43).unwrap();
    assert_ne!(da.y, dc.y);
    assert_eq!(da.x, dc.x);
}

#[test]
fn noise_scales_with_b() {
    let cfg = RunConfig::default();
    let problem = cfg.problem().unwrap();
    let (_, clean) = simulate(&cfg, &problem, 0.0, 1).unwrap();
    let (_, lo) = simulate(&cfg, &problem, 0.02, 1).unwrap();
    let (_, hi) = simulate(&cfg, &problem, 0.08, 1).unwrap();
    let rms = |d: &gpcinfer::gp::Dataset| ((&d.y - &clean.y).norm_squared() / d.y.len() as f64).sqrt();
    assert!(rms(&lo) > 0.0);
    // b is a relative variance, so the SD grows with its square root.
    assert!((rms(&hi) / rms(&lo) - 2.0).abs() < 1e-9, "{}", rms(&hi) / rms(&lo));
}

#[test]
fn config_snapshot_round_trips() {
    let mut cfg = RunConfig::default();
    cfg.seed = 17;
    cfg.experiment.noise_levels = vec![0.01, 0.05];
    cfg.experiment.methods = vec![Method::GpcI, Method::Bo];
    let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, back);
    assert!(RunConfig::from_toml("[physics.grid]\ndz = -1.0\n").is_err());
    assert!(RunConfig::from_toml("not_a_field = 3\n").is_err());
}

#[test]
fn experiment_tables_match_replicate_rows() {
    let mut cfg = RunConfig::default();
    cfg.experiment.methods = vec![Method::Bo];
    cfg.experiment.n_replicates = 2;
    cfg.experiment.noise_levels = vec![0.05];
    cfg.bo.iterations = 3;
    cfg.bo.n_candidates = 500;
    let out = run_experiment(&cfg, 1).unwrap();
    assert_eq!(out.replicates.len(), 2);
    assert!(out.replicates.iter().all(|r| r.error.is_none() && r.solver_calls == 8));

    let dir = tempfile::tempdir().unwrap();
    write_experiment(dir.path(), &cfg, &out).unwrap();
    let rows: Vec<ReplicateResult> = io::read_records(&dir.path().join("replicates.csv")).unwrap();
    let table: Vec<TableRow> = io::read_records(&dir.path().join("table.csv")).unwrap();
    let again = aggregate(&rows, cfg.truth.as_array());
    assert_eq!(table.len(), again.len());
    for (a, b) in table.iter().zip(&again) {
        assert_eq!((a.method, &a.parameter, a.n_ok), (b.method, &b.parameter, b.n_ok));
        assert!((a.mean.unwrap() - b.mean.unwrap()).abs() < 1e-12);
        assert!((a.rmse.unwrap() - b.rmse.unwrap()).abs() < 1e-12);
    }
    let saved = RunConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);

    let plots = dir.path().join("plots");
    let written = plotdata(dir.path(), &plots).unwrap();
    assert!(written.iter().any(|p| p.ends_with("boxplot.csv")));
}

#[test]
fn plotdata_rejects_missing_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(plotdata(&dir.path().join("nope"), dir.path()).is_err());
}

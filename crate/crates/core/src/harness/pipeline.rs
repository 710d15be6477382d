use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_opt::{gppde_estimate, run_bo_pipeline, BoMode, BoRun, GppdeResult};
use crate::correction::{fit_state_surrogate, run_gpc_i_with_model, GpcIResult};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::optim::LbfgsOptions;
use crate::solver::{sample_observations, Problem, SolutionField};

use super::config::{Method, RunConfig};
use super::io;

/// Solves at the configured truth and samples noisy observations.
pub fn simulate(cfg: &RunConfig, problem: &Problem, noise_b: f64, seed: u64) -> Result<(SolutionField, Dataset)> {
    let field = problem.solve(&cfg.truth)?;
    let data = sample_observations(&field, &cfg.simulation.design, noise_b, seed)?;
    Ok((field, data))
}

/// Full output of one method on one dataset.
#[derive(Clone, Debug)]
pub enum MethodOutput {
    Gppde(GppdeResult),
    GpcI(Box<GpcIResult>),
    Bo(BoRun),
}

impl MethodOutput {
    pub fn estimate(&self) -> Vec<f64> {
        match self {
            MethodOutput::Gppde(r) => r.theta.clone(),
            MethodOutput::GpcI(r) => r.estimate.clone(),
            MethodOutput::Bo(r) => r.result.theta.clone(),
        }
    }

    pub fn solver_calls(&self) -> usize {
        match self {
            MethodOutput::Gppde(_) => 0,
            MethodOutput::GpcI(r) => r.solver_calls,
            MethodOutput::Bo(r) => r.solver_calls,
        }
    }
}

/// Runs `method` on `data`. `model` is the fitted state surrogate, required
/// by every method except plain BO.
pub fn run_method(
    method: Method,
    data: &Dataset,
    model: Option<&GpModel>,
    cfg: &RunConfig,
    problem: &Problem,
    seed: u64,
) -> Result<MethodOutput> {
    let need_model = || model.ok_or_else(|| Error::InvalidArgument(format!("{} needs a state surrogate", method.label())));
    match method {
        Method::Gppde => Ok(MethodOutput::Gppde(gppde_estimate(
            data,
            need_model()?,
            &problem.profile,
            &problem.env,
            &cfg.prior.bounds(),
            None,
            &LbfgsOptions::default(),
        )?)),
        Method::GpcI => Ok(MethodOutput::GpcI(Box::new(run_gpc_i_with_model(
            data,
            need_model()?,
            &cfg.gpc_i(seed),
            &cfg.prior,
            problem,
        )?))),
        Method::BoGpc => Ok(MethodOutput::Bo(run_bo_pipeline(
            data,
            Some(need_model()?),
            &cfg.bo_run(seed),
            BoMode::BoGpc,
            &cfg.prior,
            problem,
        )?)),
        Method::Bo => Ok(MethodOutput::Bo(run_bo_pipeline(
            data,
            None,
            &cfg.bo_run(seed),
            BoMode::Bo,
            &cfg.prior,
            problem,
        )?)),
    }
}

/// One row of the raw replicate table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub method: Method,
    pub noise_b: f64,
    pub replicate: usize,
    pub seed: u64,
    pub beta: Option<f64>,
    #[serde(rename = "L_m")]
    pub l_m: Option<f64>,
    pub runtime_s: f64,
    pub solver_calls: usize,
    pub ess_fraction: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub hpd_contains_truth: Option<bool>,
    pub clamp_events: usize,
    pub max_step_mass_imbalance: f64,
    pub error: Option<String>,
}

impl ReplicateResult {
    /// Row for one method outcome; the bookkeeping fields (noise level,
    /// replicate, seed, timing, solver diagnostics) are left zero for the
    /// caller. `truth` enables the HPD coverage flag.
    pub fn from_output(method: Method, res: &Result<MethodOutput>, truth: Option<[f64; 2]>) -> Self {
        let mut row = ReplicateResult {
            method,
            noise_b: 0.0,
            replicate: 0,
            seed: 0,
            beta: None,
            l_m: None,
            runtime_s: 0.0,
            solver_calls: 0,
            ess_fraction: None,
            acceptance_rate: None,
            hpd_contains_truth: None,
            clamp_events: 0,
            max_step_mass_imbalance: 0.0,
            error: None,
        };
        match res {
            Ok(o) => {
                let th = o.estimate();
                row.beta = Some(th[0]);
                row.l_m = Some(th[1]);
                row.solver_calls = o.solver_calls();
                if let MethodOutput::GpcI(r) = o {
                    row.ess_fraction = Some(r.ess_fraction);
                    row.acceptance_rate = Some(r.chain.acceptance_rate);
                    row.hpd_contains_truth = truth.map(|t| r.hpd.contains(&t));
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    pub fn theta(&self) -> Option<[f64; 2]> {
        Some([self.beta?, self.l_m?])
    }
}

/// Simulates one dataset, fits the state surrogate once and runs every
/// configured method on it.
pub fn run_replicate(cfg: &RunConfig, problem: &Problem, noise_b: f64, replicate: usize) -> Result<Vec<ReplicateResult>> {
    let seeds = cfg.replicate_seeds(replicate);
    let (field, data) = simulate(cfg, problem, noise_b, seeds.data)?;
    let methods = &cfg.experiment.methods;
    let t0 = Instant::now();
    let model = if methods.iter().any(|m| m.uses_state_gp()) {
        Some(fit_state_surrogate(&data, cfg.gp.restarts, seeds.gp))
    } else {
        None
    };
    let gp_time = t0.elapsed().as_secs_f64();
    let truth = cfg.truth.as_array();
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let t = Instant::now();
        let res = match (&model, method.uses_state_gp()) {
            (Some(Err(e)), true) => Err(Error::InvalidArgument(format!("state surrogate fit failed: {e}"))),
            (Some(Ok(m)), true) => run_method(method, &data, Some(m), cfg, problem, seeds.method),
            _ => run_method(method, &data, None, cfg, problem, seeds.method),
        };
        let runtime = t.elapsed().as_secs_f64() + if method.uses_state_gp() { gp_time } else { 0.0 };
        let mut row = ReplicateResult::from_output(method, &res, Some(truth));
        row.noise_b = noise_b;
        row.replicate = replicate;
        row.seed = cfg.experiment.seed_base + replicate as u64;
        row.runtime_s = runtime;
        row.clamp_events = field.stats.clamp_events;
        row.max_step_mass_imbalance = field.stats.max_step_relative_imbalance;
        if let Some(e) = &row.error {
            warn!("{} failed on replicate {replicate} (b = {noise_b}): {e}", method.label());
        }
        info!(
            "b={noise_b} rep={replicate} {}: {:?} in {:.1}s",
            method.label(),
            row.theta(),
            row.runtime_s
        );
        out.push(row);
    }
    Ok(out)
}

/// Aggregate over replicates for one method, noise level and parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub noise_b: f64,
    pub parameter: String,
    pub truth: f64,
    /// `None` when every replicate failed.
    pub mean: Option<f64>,
    pub rmse: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Means and RMSEs `sqrt(mean (est - truth)^2)` over successful replicates.
pub fn aggregate(rows: &[ReplicateResult], truth: [f64; 2]) -> Vec<TableRow> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.method && k.1 == r.noise_b) {
            keys.push((r.method, r.noise_b));
        }
    }
    keys.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut table = Vec::new();
    for (method, b) in keys {
        let cell: Vec<&ReplicateResult> = rows.iter().filter(|r| r.method == method && r.noise_b == b).collect();
        let ok: Vec<[f64; 2]> = cell.iter().filter_map(|r| r.theta()).collect();
        for (k, name) in ["beta", "L_m"].iter().enumerate() {
            let n = ok.len() as f64;
            let (mean, rmse) = if ok.is_empty() {
                (None, None)
            } else {
                let m = ok.iter().map(|t| t[k]).sum::<f64>() / n;
                let r = (ok.iter().map(|t| (t[k] - truth[k]).powi(2)).sum::<f64>() / n).sqrt();
                (Some(m), Some(r))
            };
            table.push(TableRow {
                method,
                noise_b: b,
                parameter: name.to_string(),
                truth: truth[k],
                mean,
                rmse,
                n_ok: ok.len(),
                n_failed: cell.len() - ok.len(),
            });
        }
    }
    table
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub replicates: Vec<ReplicateResult>,
    pub table: Vec<TableRow>,
}

/// Every (noise level, replicate) cell, `jobs` at a time; results are ordered
/// by noise level, replicate and method regardless of scheduling.
pub fn run_experiment(cfg: &RunConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let cells: Vec<(f64, usize)> = cfg
        .experiment
        .noise_levels
        .iter()
        .flat_map(|b| (0..cfg.experiment.n_replicates).map(move |r| (*b, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<Vec<ReplicateResult>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(b, r)| run_replicate(cfg, &problem, *b, *r))
            .collect()
    });
    let mut replicates = Vec::new();
    for r in results {
        replicates.extend(r?);
    }
    let table = aggregate(&replicates, cfg.truth.as_array());
    Ok(ExperimentOutput { replicates, table })
}

/// Writes `replicates.csv`, `table.csv` and the config snapshot.
pub fn write_experiment(dir: &Path, cfg: &RunConfig, out: &ExperimentOutput) -> Result<()> {
    io::create_dir(dir)?;
    io::write_string(&dir.join("config.toml"), &cfg.to_toml())?;
    io::write_records(&dir.join("replicates.csv"), &out.replicates)?;
    io::write_records(&dir.join("table.csv"), &out.table)
}

/// Writes the run record of a single inference.
pub fn write_run_record(dir: &Path, cfg: &RunConfig, out: &MethodOutput) -> Result<()> {
    io::create_dir(dir)?;
    io::write_string(&dir.join("config.toml"), &cfg.to_toml())?;
    let th = out.estimate();
    #[derive(Serialize)]
    struct Estimate {
        beta: f64,
        #[serde(rename = "L_m")]
        l_m: f64,
        solver_calls: usize,
        ess_fraction: Option<f64>,
    }
    let ess = match out {
        MethodOutput::GpcI(r) => Some(r.ess_fraction),
        _ => None,
    };
    io::write_records(
        &dir.join("estimate.csv"),
        &[Estimate {
            beta: th[0],
            l_m: th[1],
            solver_calls: out.solver_calls(),
            ess_fraction: ess,
        }],
    )?;
    match out {
        MethodOutput::GpcI(r) => {
            io::write_records(&dir.join("samples.csv"), &io::sample_rows(&r.samples))?;
            io::write_records(&dir.join("chain.csv"), &io::chain_rows(&r.chain))?;
            io::write_records(&dir.join("kde_grid.csv"), &io::kde_grid_rows(&r.kde, &r.hpd))?;
            io::write_records(&dir.join("hpd.csv"), &io::hpd_rows(&r.hpd))?;
        }
        MethodOutput::Bo(r) => {
            io::write_records(&dir.join("trace.csv"), &io::trace_rows(&r.result.trace))?;
        }
        MethodOutput::Gppde(_) => {}
    }
    Ok(())
}

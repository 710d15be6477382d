//! Long-format CSV exports for plotting, built from a run directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes_opt::quantile;
use crate::correction::posterior_density;
use crate::error::{Error, Result};

use super::config::{Method, RunConfig};
use super::io::{self, kde_grid_rows, ChainRow, HpdRow, SampleRow, TraceRow};
use super::pipeline::ReplicateResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub method: Method,
    pub noise_b: f64,
    pub parameter: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Five-number summaries (type-7 quartiles) of the estimates per method,
/// noise level and parameter.
pub fn boxplot_rows(rows: &[ReplicateResult]) -> Vec<BoxplotRow> {
    let mut keys: Vec<(Method, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.method && k.1 == r.noise_b) {
            keys.push((r.method, r.noise_b));
        }
    }
    keys.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out = Vec::new();
    for (method, b) in keys {
        let ok: Vec<[f64; 2]> = rows
            .iter()
            .filter(|r| r.method == method && r.noise_b == b)
            .filter_map(|r| r.theta())
            .collect();
        if ok.is_empty() {
            continue;
        }
        for (k, name) in ["beta", "L_m"].iter().enumerate() {
            let v: Vec<f64> = ok.iter().map(|t| t[k]).collect();
            out.push(BoxplotRow {
                method,
                noise_b: b,
                parameter: name.to_string(),
                n: v.len(),
                min: quantile(&v, 0.0),
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: quantile(&v, 1.0),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLongRow {
    pub iter: usize,
    pub parameter: String,
    pub value: f64,
}

/// One row per iteration and series (`beta`, `L_m`, `log_target`).
pub fn chain_long_rows(chain: &[ChainRow]) -> Vec<TraceLongRow> {
    let mut out = Vec::with_capacity(3 * chain.len());
    for r in chain {
        for (name, v) in [("beta", r.beta), ("L_m", r.l_m), ("log_target", r.log_target)] {
            out.push(TraceLongRow {
                iter: r.iter,
                parameter: name.to_string(),
                value: v,
            });
        }
    }
    out
}

/// Running minimum of the BO objective, one row per evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSoFarRow {
    pub t: usize,
    pub u: Option<f64>,
    pub best_u: Option<f64>,
}

pub fn best_so_far_rows(trace: &[TraceRow]) -> Vec<BestSoFarRow> {
    let mut best: Option<f64> = None;
    trace
        .iter()
        .map(|r| {
            if let Some(u) = r.u {
                best = Some(best.map_or(u, |b: f64| b.min(u)));
            }
            BestSoFarRow {
                t: r.t,
                u: r.u,
                best_u: best,
            }
        })
        .collect()
}

/// Writes every export the run directory supports and returns the files
/// written. Single-inference records yield density, HPD and trace exports;
/// experiment records yield boxplot summaries.
pub fn plotdata(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !run_dir.is_dir() {
        return Err(Error::NotFound(run_dir.to_path_buf()));
    }
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = out_dir.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };
    io::create_dir(out_dir)?;

    let samples_path = run_dir.join("samples.csv");
    if samples_path.exists() {
        let cfg = RunConfig::load(&run_dir.join("config.toml"))?;
        let samples: Vec<SampleRow> = io::read_records(&samples_path)?;
        let thetas: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.beta, s.l_m]).collect();
        let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
        let (kde, hpd) = posterior_density(&thetas, &weights, &cfg.prior, &cfg.gpc_i(cfg.seed))?;
        emit("density_grid.csv", &|p| io::write_records(p, &kde_grid_rows(&kde, &hpd)))?;
        emit("hpd_cells.csv", &|p| io::write_records::<HpdRow>(p, &io::hpd_rows(&hpd)))?;
    }
    let chain_path = run_dir.join("chain.csv");
    if chain_path.exists() {
        let chain: Vec<ChainRow> = io::read_records(&chain_path)?;
        emit("chain_trace.csv", &|p| io::write_records(p, &chain_long_rows(&chain)))?;
    }
    let trace_path = run_dir.join("trace.csv");
    if trace_path.exists() {
        let trace: Vec<TraceRow> = io::read_records(&trace_path)?;
        emit("bo_trace.csv", &|p| io::write_records(p, &best_so_far_rows(&trace)))?;
    }
    let reps_path = run_dir.join("replicates.csv");
    if reps_path.exists() {
        let reps: Vec<ReplicateResult> = io::read_records(&reps_path)?;
        emit("boxplot.csv", &|p| io::write_records(p, &boxplot_rows(&reps)))?;
    }
    if written.is_empty() {
        return Err(Error::NotFound(run_dir.join("samples.csv")));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_trace_has_three_rows_per_iteration() {
        let chain: Vec<ChainRow> = (0..7)
            .map(|i| ChainRow {
                iter: i,
                beta: 1.0,
                l_m: 2.0,
                log_target: -3.0,
                accepted: 1,
            })
            .collect();
        let rows = chain_long_rows(&chain);
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[4].parameter, "L_m");
        assert_eq!(rows[4].iter, 1);
    }

    #[test]
    fn best_so_far_skips_failures() {
        let mk = |t, u| TraceRow {
            t,
            beta: 0.0,
            l_m: 0.0,
            u,
            mode: "bo".into(),
        };
        let rows = best_so_far_rows(&[mk(0, None), mk(1, Some(3.0)), mk(2, Some(5.0)), mk(3, Some(1.0))]);
        let best: Vec<Option<f64>> = rows.iter().map(|r| r.best_u).collect();
        assert_eq!(best, vec![None, Some(3.0), Some(3.0), Some(1.0)]);
    }
}

//! CSV and plain-text persistence for datasets, physics inputs and run
//! records.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bayes_opt::TraceEntry;
use crate::collocation::Chain;
use crate::correction::{HpdRegion, WeightedKde, WeightedSample};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpHyperparams, DIM_T, DIM_Z};
use crate::richards::{EnvironmentModel, FeddesParams, RootGrowth, Series, SoilLayerParams, SoilProfile};
use crate::solver::SolutionField;

pub fn read_to_string(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_string(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct DataRow {
    z: f64,
    t: f64,
    y: f64,
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let rows: Vec<DataRow> = (0..data.len())
        .map(|i| DataRow {
            z: data.x[(i, DIM_Z)],
            t: data.x[(i, DIM_T)],
            y: data.y[i],
        })
        .collect();
    write_records(path, &rows)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let rows: Vec<DataRow> = read_records(path)?;
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no observations", path.display())));
    }
    let z: Vec<f64> = rows.iter().map(|r| r.z).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
    Dataset::from_columns(&z, &t, &y)
}

pub fn write_soil(path: &Path, profile: &SoilProfile) -> Result<()> {
    write_records(path, profile.layers())
}

pub fn read_soil(path: &Path) -> Result<SoilProfile> {
    let layers: Vec<SoilLayerParams> = read_records(path)?;
    SoilProfile::new(layers)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct EnvRow {
    day: f64,
    #[serde(rename = "T_p")]
    t_p: f64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(rename = "E_a")]
    e_a: f64,
    #[serde(rename = "A1")]
    a1: f64,
    #[serde(rename = "A2")]
    a2: f64,
    #[serde(rename = "A3")]
    a3: f64,
    #[serde(rename = "A4")]
    a4: f64,
}

/// Daily environment table; rows must cover days 0, 1, 2, ... without gaps.
pub fn read_environment(path: &Path) -> Result<EnvironmentModel> {
    let mut rows: Vec<EnvRow> = read_records(path)?;
    rows.sort_by(|a, b| a.day.total_cmp(&b.day));
    if rows.is_empty() || rows.iter().enumerate().any(|(i, r)| r.day != i as f64) {
        return Err(Error::Parse(format!(
            "{}: days must run 0, 1, 2, ... without gaps",
            path.display()
        )));
    }
    let env = EnvironmentModel {
        potential_transpiration: Series::Daily(rows.iter().map(|r| r.t_p).collect()),
        rainfall: Series::Daily(rows.iter().map(|r| r.r).collect()),
        evaporation: Series::Daily(rows.iter().map(|r| r.e_a).collect()),
        feddes: Series::Daily(
            rows.iter()
                .map(|r| FeddesParams {
                    a1: r.a1,
                    a2: r.a2,
                    a3: r.a3,
                    a4: r.a4,
                })
                .collect(),
        ),
        root_growth: RootGrowth::default(),
    };
    env.validate()?;
    Ok(env)
}

pub fn write_environment(path: &Path, env: &EnvironmentModel, days: usize) -> Result<()> {
    let rows: Vec<EnvRow> = (0..days)
        .map(|d| {
            let t = d as f64 * crate::richards::SECONDS_PER_DAY;
            let a = env.feddes_at(t);
            EnvRow {
                day: d as f64,
                t_p: env.transpiration(t),
                r: env.rainfall.at(t),
                e_a: env.evaporation.at(t),
                a1: a.a1,
                a2: a.a2,
                a3: a.a3,
                a4: a.a4,
            }
        })
        .collect();
    write_records(path, &rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub z: f64,
    pub t: f64,
    pub f: f64,
    pub h: f64,
}

pub fn write_field(path: &Path, field: &SolutionField) -> Result<()> {
    let mut rows = Vec::with_capacity(field.z.len() * field.t.len());
    for (j, t) in field.t.iter().enumerate() {
        for (i, z) in field.z.iter().enumerate() {
            rows.push(FieldRow {
                z: *z,
                t: *t,
                f: field.f[(i, j)],
                h: field.h[(i, j)],
            });
        }
    }
    write_records(path, &rows)
}

pub fn write_hyperparams(path: &Path, hp: &GpHyperparams) -> Result<()> {
    write_string(path, &hp.to_key_value())
}

pub fn read_hyperparams(path: &Path) -> Result<GpHyperparams> {
    GpHyperparams::from_key_value(&read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub iter: usize,
    pub beta: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    pub log_target: f64,
    pub accepted: u8,
}

pub fn chain_rows(chain: &Chain) -> Vec<ChainRow> {
    (0..chain.len())
        .map(|i| ChainRow {
            iter: i,
            beta: chain.states[i][0],
            l_m: chain.states[i][1],
            log_target: chain.log_target[i],
            accepted: chain.accepted[i] as u8,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub beta: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    pub log_approx: f64,
    pub log_true: f64,
    pub weight: f64,
}

pub fn sample_rows(samples: &[WeightedSample]) -> Vec<SampleRow> {
    samples
        .iter()
        .map(|s| SampleRow {
            beta: s.theta[0],
            l_m: s.theta[1],
            log_approx: s.log_approx,
            log_true: s.log_true,
            weight: s.weight,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub beta: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    pub density: f64,
}

/// KDE evaluated at every cell center of the HPD grid.
pub fn kde_grid_rows(kde: &WeightedKde, hpd: &HpdRegion) -> Vec<DensityRow> {
    let g = &hpd.grid;
    let mut rows = Vec::with_capacity(g.n[0] * g.n[1]);
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            let c = g.center(i, j);
            rows.push(DensityRow {
                beta: c[0],
                l_m: c[1],
                density: kde.density(&c),
            });
        }
    }
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpdRow {
    pub beta: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    pub density: f64,
    pub threshold: f64,
}

/// Cell centers inside the region.
pub fn hpd_rows(hpd: &HpdRegion) -> Vec<HpdRow> {
    let n1 = hpd.grid.n[1];
    hpd.cells()
        .into_iter()
        .map(|(i, j)| {
            let c = hpd.grid.center(i, j);
            HpdRow {
                beta: c[0],
                l_m: c[1],
                density: hpd.values()[i * n1 + j],
                threshold: hpd.threshold,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub beta: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
    /// Empty when the evaluation failed.
    pub u: Option<f64>,
    pub mode: String,
}

pub fn trace_rows(trace: &[TraceEntry]) -> Vec<TraceRow> {
    trace
        .iter()
        .map(|e| TraceRow {
            t: e.t,
            beta: e.theta[0],
            l_m: e.theta[1],
            u: e.u,
            mode: e.mode.label().to_string(),
        })
        .collect()
}

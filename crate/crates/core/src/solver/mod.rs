//! Mixed-form Picard finite-difference solver for the Richards equation, and
//! observation sampling from solved fields.

mod observe;
mod picard;
mod thomas;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::richards::{Series, SECONDS_PER_DAY};

pub use observe::{sample_observations, ObservationDesign};
pub use picard::{picard_step, solve_richards, PicardOutcome, Problem};
pub use thomas::thomas_solve;

/// Uniform node grid in elevation `z` (ascending, negative below surface)
/// and a fixed nominal time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    z_nodes: Vec<f64>,
    dz: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Grid {
    pub fn uniform(z_bottom: f64, z_top: f64, dz: f64, t_final: f64, dt: f64) -> Result<Self> {
        if !(dz > 0.0 && z_top > z_bottom && dt > 0.0 && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad grid: z in [{z_bottom}, {z_top}], dz={dz}, dt={dt}, t_final={t_final}"
            )));
        }
        let steps = (z_top - z_bottom) / dz;
        let m = steps.round() as usize + 1;
        if (steps - steps.round()).abs() > 1e-9 || m < 3 {
            return Err(Error::InvalidArgument(format!(
                "depth range {} is not a multiple of dz={dz} with at least 3 nodes",
                z_top - z_bottom
            )));
        }
        let z_nodes = (0..m).map(|i| z_bottom + dz * i as f64).collect();
        Ok(Self {
            z_nodes,
            dz,
            t_final,
            dt,
        })
    }

    /// 0.3 m column, 5 mm spacing, 90 days at 400 s steps.
    pub fn standard() -> Self {
        Self::uniform(-0.30, -0.01, 0.005, 90.0 * SECONDS_PER_DAY, 400.0).expect("valid grid")
    }

    pub fn z_nodes(&self) -> &[f64] {
        &self.z_nodes
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn len(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_nodes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundary {
    /// Free drainage: the flux below the bottom node equals its conductivity.
    UnitGradient,
    /// Prescribed downward flux (m/s).
    Flux(Series<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBoundary {
    /// `R(t) - E_a(t)` from the environment.
    Environment,
    /// Prescribed downward flux into the top node (m/s).
    Flux(Series<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Content(Vec<f64>),
    Head(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditions {
    pub upper: UpperBoundary,
    pub lower: LowerBoundary,
    pub initial: InitialState,
}

impl BoundaryConditions {
    /// Initial content `0.33 + 0.5 (z + 0.1)^2`, free drainage, surface flux
    /// from the environment.
    pub fn standard(grid: &Grid) -> Self {
        Self {
            upper: UpperBoundary::Environment,
            lower: LowerBoundary::UnitGradient,
            initial: InitialState::Content(
                grid.z_nodes().iter().map(|z| standard_initial_content(*z)).collect(),
            ),
        }
    }
}

pub fn standard_initial_content(z: f64) -> f64 {
    0.33 + 0.5 * (z + 0.1) * (z + 0.1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConductivityMean {
    #[default]
    Arithmetic,
    Geometric,
    /// Conductivity of the node the flux comes from.
    Upstream,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Convergence threshold on the head increment (m, infinity norm).
    pub tol: f64,
    /// Number of times a step may be halved before giving up.
    pub max_halvings: u32,
    /// Seconds between stored columns; must be a multiple of `dt`.
    pub store_interval: f64,
    pub conductivity_mean: ConductivityMean,
    pub keep_flux_log: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-6,
            max_halvings: 6,
            store_interval: SECONDS_PER_DAY,
            conductivity_mean: ConductivityMean::Arithmetic,
            keep_flux_log: false,
        }
    }
}

/// Water budget over one accepted (sub)step. Fluxes are downward, in m/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub iterations: usize,
    pub top_flux: f64,
    pub bottom_flux: f64,
    /// Column-integrated sink (m/s).
    pub sink: f64,
    /// Change in column storage (m).
    pub storage_change: f64,
}

impl StepRecord {
    /// Storage change minus net inflow (m).
    pub fn imbalance(&self) -> f64 {
        self.storage_change - self.dt * (self.top_flux - self.bottom_flux - self.sink)
    }

    pub fn relative_imbalance(&self) -> f64 {
        let scale = self
            .storage_change
            .abs()
            .max(self.dt * (self.top_flux.abs() + self.bottom_flux.abs() + self.sink.abs()));
        if scale == 0.0 {
            0.0
        } else {
            self.imbalance().abs() / scale
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub steps: usize,
    pub picard_iterations: usize,
    pub max_iterations_in_step: usize,
    /// Number of times a step had to be split in half.
    pub halvings: usize,
    /// Nodes whose head fell below the head floor and was reset to it.
    pub clamp_events: usize,
    pub max_step_relative_imbalance: f64,
    pub cumulative_imbalance: f64,
    pub initial_storage: f64,
}

impl SolverStats {
    pub fn cumulative_relative_imbalance(&self) -> f64 {
        self.cumulative_imbalance.abs() / self.initial_storage
    }
}

/// Solved water content and head; column `j` of each matrix is time `t[j]`,
/// row `i` is node `z[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionField {
    pub z: Vec<f64>,
    pub t: Vec<f64>,
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub flux_log: Vec<StepRecord>,
    pub stats: SolverStats,
}

impl SolutionField {
    /// Bilinear interpolation of water content.
    pub fn interpolate(&self, z: f64, t: f64) -> Result<f64> {
        let (i0, i1, wz) = bracket(&self.z, z).ok_or(Error::OutOfDomain { z, t })?;
        let (j0, j1, wt) = bracket(&self.t, t).ok_or(Error::OutOfDomain { z, t })?;
        let f = &self.f;
        let a = f[(i0, j0)] * (1.0 - wz) + f[(i1, j0)] * wz;
        let b = f[(i0, j1)] * (1.0 - wz) + f[(i1, j1)] * wz;
        Ok(a * (1.0 - wt) + b * wt)
    }
}

/// Indices and weight for linear interpolation in an ascending grid, with a
/// small tolerance at the ends.
fn bracket(grid: &[f64], x: f64) -> Option<(usize, usize, f64)> {
    let n = grid.len();
    if n == 0 || !x.is_finite() {
        return None;
    }
    let span = (grid[n - 1] - grid[0]).abs().max(1.0);
    let tol = 1e-9 * span;
    if x < grid[0] - tol || x > grid[n - 1] + tol {
        return None;
    }
    if n == 1 {
        return Some((0, 0, 0.0));
    }
    let x = x.clamp(grid[0], grid[n - 1]);
    let k = grid.partition_point(|g| *g <= x).clamp(1, n - 1);
    let (lo, hi) = (grid[k - 1], grid[k]);
    Some((k - 1, k, (x - lo) / (hi - lo)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_grid_has_59_nodes() {
        let g = Grid::standard();
        assert_eq!(g.len(), 59);
        assert!((g.z_nodes()[58] + 0.01).abs() < 1e-12);
        for w in g.z_nodes().windows(2) {
            assert!((w[1] - w[0] - 0.005).abs() < 1e-12);
        }
    }

    #[test]
    fn non_multiple_spacing_rejected() {
        assert!(Grid::uniform(-0.3, -0.01, 0.007, 10.0, 1.0).is_err());
    }

    #[test]
    fn bracket_edges() {
        let g = [0.0, 1.0, 2.0];
        assert_eq!(bracket(&g, 0.0), Some((0, 1, 0.0)));
        assert_eq!(bracket(&g, 2.0), Some((1, 2, 1.0)));
        assert_eq!(bracket(&g, 1.5), Some((1, 2, 0.5)));
        assert_eq!(bracket(&g, 2.1), None);
    }
}

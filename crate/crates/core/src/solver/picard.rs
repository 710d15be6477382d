use log::debug;

use super::thomas::thomas_into;
use super::{
    BoundaryConditions, ConductivityMean, Grid, InitialState, LowerBoundary, SolutionField,
    SolverOptions, SolverStats, StepRecord, UpperBoundary,
};
use crate::error::{Error, Result};
use crate::richards::{
    feddes_alpha, head_from_water_content, root_density, EnvironmentModel, SinkParams,
    SoilLayerParams, SoilProfile, HEAD_FLOOR,
};
use nalgebra::DMatrix;

/// Everything a forward solve needs apart from theta.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: Grid,
    pub profile: SoilProfile,
    pub bc: BoundaryConditions,
    pub env: EnvironmentModel,
    pub opts: SolverOptions,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        let m = self.grid.len();
        let n_init = match &self.bc.initial {
            InitialState::Content(v) | InitialState::Head(v) => v.len(),
        };
        if n_init != m {
            return Err(Error::InvalidArgument(format!(
                "initial state has {n_init} entries for {m} nodes"
            )));
        }
        let bottom = self.grid.z_nodes()[0].abs();
        if bottom > self.profile.max_depth() + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "grid reaches depth {bottom} but the soil profile ends at {}",
                self.profile.max_depth()
            )));
        }
        let o = &self.opts;
        if o.max_iter == 0 || !(o.tol > 0.0) {
            return Err(Error::InvalidArgument("Picard max_iter and tol must be positive".into()));
        }
        let ratio = o.store_interval / self.grid.dt;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "store interval {} is not a multiple of dt {}",
                o.store_interval, self.grid.dt
            )));
        }
        let steps = self.grid.t_final / self.grid.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "t_final {} is not a multiple of dt {}",
                self.grid.t_final, self.grid.dt
            )));
        }
        Ok(())
    }

    fn node_soils(&self) -> Result<Vec<SoilLayerParams>> {
        self.grid
            .z_nodes()
            .iter()
            .map(|z| self.profile.layer_at(z.abs()).cloned())
            .collect()
    }

    /// Initial head at every node.
    pub fn initial_head(&self) -> Result<Vec<f64>> {
        let soils = self.node_soils()?;
        match &self.bc.initial {
            InitialState::Head(h) => Ok(h.clone()),
            InitialState::Content(f) => f
                .iter()
                .zip(&soils)
                .map(|(f, s)| head_from_water_content(*f, s))
                .collect(),
        }
    }

    pub fn solve(&self, theta: &SinkParams) -> Result<SolutionField> {
        solve_richards(self, theta)
    }
}

/// Water content, specific capacity and conductivity at one head, sharing
/// the expensive powers.
#[inline]
fn node_state(h: f64, s: &SoilLayerParams) -> (f64, f64, f64) {
    if h >= 0.0 {
        return (s.c_s, 0.0, s.k_sat);
    }
    let nu = s.nu;
    let n = 1.0 / (1.0 - nu);
    let u = s.gamma * (-h);
    let un = u.powf(n);
    let base = 1.0 + un;
    // Effective saturation; note that se^(1/nu) = 1/base.
    let se = base.powf(-nu);
    let delta = s.c_s - s.c_r;
    let f = s.c_r + delta * se;
    let cap = if u > 0.0 {
        delta * nu * n * s.gamma * (un / u) * se / base
    } else {
        0.0
    };
    let g = 1.0 - (un / base).powf(nu);
    let k = s.k_sat * se.sqrt() * g * g;
    (f, cap, k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardOutcome {
    pub h: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub record: StepRecord,
    pub clamps: usize,
}

struct Workspace {
    f_prev: Vec<f64>,
    f: Vec<f64>,
    cap: Vec<f64>,
    k: Vec<f64>,
    s: Vec<f64>,
    kh: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    cp: Vec<f64>,
    dp: Vec<f64>,
    v: Vec<f64>,
}

impl Workspace {
    fn new(m: usize) -> Self {
        let z = || vec![0.0; m];
        Self {
            f_prev: z(),
            f: z(),
            cap: z(),
            k: z(),
            s: z(),
            kh: vec![0.0; m - 1],
            a: vec![0.0; m - 1],
            b: z(),
            c: vec![0.0; m - 1],
            d: z(),
            cp: z(),
            dp: z(),
            v: z(),
        }
    }
}

struct Stepper<'a> {
    p: &'a Problem,
    theta: SinkParams,
    soils: Vec<SoilLayerParams>,
    depth: Vec<f64>,
    ws: Workspace,
}

impl<'a> Stepper<'a> {
    fn new(p: &'a Problem, theta: &SinkParams) -> Result<Self> {
        let soils = p.node_soils()?;
        let depth = p.grid.z_nodes().iter().map(|z| z.abs()).collect();
        Ok(Self {
            p,
            theta: *theta,
            soils,
            depth,
            ws: Workspace::new(p.grid.len()),
        })
    }

    /// One implicit step from `h_prev` at time `t` to `t + dt`.
    fn step(&mut self, h_prev: &[f64], t: f64, dt: f64) -> Result<PicardOutcome> {
        let p = self.p;
        let m = p.grid.len();
        let dz = p.grid.dz();
        let dz2 = dz * dz;
        let t_new = t + dt;
        let env = &p.env;
        let l_root = env.rooting_depth(&self.theta, t_new)?;
        let feddes = env.feddes_at(t_new);
        let tp = env.transpiration(t_new);
        let density: Vec<f64> = self
            .depth
            .iter()
            .map(|d| root_density(*d, self.theta.beta, l_root))
            .collect();
        let g_top = match &p.bc.upper {
            UpperBoundary::Environment => env.surface_flux(t_new),
            UpperBoundary::Flux(s) => s.at(t_new),
        };

        let ws = &mut self.ws;
        for i in 0..m {
            ws.f_prev[i] = node_state(h_prev[i], &self.soils[i]).0;
        }
        let mut h = h_prev.to_vec();
        let mut clamps = 0;
        let mut converged = false;
        let mut iterations = 0;
        let mut g_bot = 0.0;
        for _ in 0..p.opts.max_iter {
            iterations += 1;
            for i in 0..m {
                let (f, cap, k) = node_state(h[i], &self.soils[i]);
                ws.f[i] = f;
                ws.cap[i] = cap;
                ws.k[i] = k;
                ws.s[i] = if density[i] > 0.0 {
                    feddes_alpha(h[i], &feddes) * tp * density[i]
                } else {
                    0.0
                };
            }
            for i in 0..m - 1 {
                ws.kh[i] = match p.opts.conductivity_mean {
                    ConductivityMean::Arithmetic => 0.5 * (ws.k[i] + ws.k[i + 1]),
                    ConductivityMean::Geometric => (ws.k[i] * ws.k[i + 1]).sqrt(),
                    ConductivityMean::Upstream => {
                        if (h[i + 1] - h[i]) / dz + 1.0 >= 0.0 {
                            ws.k[i + 1]
                        } else {
                            ws.k[i]
                        }
                    }
                };
            }
            g_bot = match &p.bc.lower {
                LowerBoundary::UnitGradient => ws.k[0],
                LowerBoundary::Flux(s) => s.at(t_new),
            };
            for i in 0..m {
                let storage = (ws.f[i] - ws.f_prev[i]) / dt;
                let (kl, kr) = (
                    if i > 0 { ws.kh[i - 1] } else { 0.0 },
                    if i < m - 1 { ws.kh[i] } else { 0.0 },
                );
                let flux_r = if i < m - 1 {
                    kr * (h[i + 1] - h[i]) / dz2 + kr / dz
                } else {
                    g_top / dz
                };
                let flux_l = if i > 0 {
                    kl * (h[i] - h[i - 1]) / dz2 + kl / dz
                } else {
                    g_bot / dz
                };
                ws.b[i] = ws.cap[i] / dt + (kl + kr) / dz2;
                if i > 0 {
                    ws.a[i - 1] = -kl / dz2;
                }
                if i < m - 1 {
                    ws.c[i] = -kr / dz2;
                }
                ws.d[i] = flux_r - flux_l - storage - ws.s[i];
            }
            thomas_into(&ws.a, &ws.b, &ws.c, &ws.d, &mut ws.cp, &mut ws.dp, &mut ws.v)?;
            let mut vmax: f64 = 0.0;
            for i in 0..m {
                h[i] += ws.v[i];
                if h[i] < HEAD_FLOOR {
                    h[i] = HEAD_FLOOR;
                    clamps += 1;
                }
                vmax = vmax.max(ws.v[i].abs());
            }
            if !vmax.is_finite() || h.iter().any(|x| !x.is_finite()) {
                break;
            }
            if vmax < p.opts.tol {
                converged = true;
                break;
            }
        }

        let mut storage_change = 0.0;
        for i in 0..m {
            storage_change += (node_state(h[i], &self.soils[i]).0 - ws.f_prev[i]) * dz;
        }
        let record = StepRecord {
            t: t_new,
            dt,
            iterations,
            top_flux: g_top,
            bottom_flux: g_bot,
            sink: ws.s.iter().sum::<f64>() * dz,
            storage_change,
        };
        Ok(PicardOutcome {
            h,
            iterations,
            converged,
            record,
            clamps,
        })
    }
}

/// A single Picard solve over `[t, t + dt]` starting from `h_prev`.
pub fn picard_step(
    problem: &Problem,
    theta: &SinkParams,
    h_prev: &[f64],
    t: f64,
    dt: f64,
) -> Result<PicardOutcome> {
    if h_prev.len() != problem.grid.len() {
        return Err(Error::InvalidArgument("head vector does not match grid".into()));
    }
    Stepper::new(problem, theta)?.step(h_prev, t, dt)
}

struct Marcher<'a> {
    stepper: Stepper<'a>,
    stats: SolverStats,
    log: Option<Vec<StepRecord>>,
}

impl Marcher<'_> {
    /// Advances over `[t, t + dt]`, halving on non-convergence.
    fn advance(&mut self, h: Vec<f64>, t: f64, dt: f64, level: u32) -> Result<Vec<f64>> {
        let out = self.stepper.step(&h, t, dt)?;
        if out.converged {
            let s = &mut self.stats;
            s.steps += 1;
            s.picard_iterations += out.iterations;
            s.max_iterations_in_step = s.max_iterations_in_step.max(out.iterations);
            s.clamp_events += out.clamps;
            s.max_step_relative_imbalance =
                s.max_step_relative_imbalance.max(out.record.relative_imbalance());
            s.cumulative_imbalance += out.record.imbalance();
            if let Some(log) = &mut self.log {
                log.push(out.record);
            }
            return Ok(out.h);
        }
        if level >= self.stepper.p.opts.max_halvings {
            return Err(Error::SolverDiverged {
                t,
                dt,
                last_head: h,
            });
        }
        self.stats.halvings += 1;
        debug!("Picard did not converge at t={t}, halving dt={dt}");
        let half = 0.5 * dt;
        let mid = self.advance(h, t, half, level + 1)?;
        self.advance(mid, t + half, half, level + 1)
    }
}

/// Marches from `t = 0` to `t_final`, storing a column every
/// `store_interval` seconds (and at `t = 0`).
pub fn solve_richards(problem: &Problem, theta: &SinkParams) -> Result<SolutionField> {
    problem.validate()?;
    let grid = &problem.grid;
    let m = grid.len();
    let dz = grid.dz();
    let mut h = problem.initial_head()?;
    let stepper = Stepper::new(problem, theta)?;
    let initial_storage: f64 = h
        .iter()
        .zip(&stepper.soils)
        .map(|(h, s)| node_state(*h, s).0 * dz)
        .sum();

    let n_steps = (grid.t_final / grid.dt).round() as usize;
    let per_store = (problem.opts.store_interval / grid.dt).round() as usize;
    let mut times = vec![0.0];
    let mut cols = vec![h.clone()];
    let mut marcher = Marcher {
        stepper,
        stats: SolverStats {
            initial_storage,
            ..Default::default()
        },
        log: problem.opts.keep_flux_log.then(Vec::new),
    };
    for s in 0..n_steps {
        let t = s as f64 * grid.dt;
        h = marcher.advance(h, t, grid.dt, 0)?;
        if (s + 1) % per_store == 0 || s + 1 == n_steps {
            times.push((s + 1) as f64 * grid.dt);
            cols.push(h.clone());
        }
    }
    let soils = &marcher.stepper.soils;
    let hm = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    let fm = DMatrix::from_fn(m, cols.len(), |i, j| node_state(cols[j][i], &soils[i]).0);
    Ok(SolutionField {
        z: grid.z_nodes().to_vec(),
        t: times,
        f: fm,
        h: hm,
        flux_log: marcher.log.unwrap_or_default(),
        stats: marcher.stats,
    })
}

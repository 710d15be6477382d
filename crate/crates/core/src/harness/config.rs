use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayes_opt::{BoRunConfig, BoproConfig};
use crate::collocation::{CollocationConfig, Prior};
use crate::correction::{GpcIConfig, NoisePrior};
use crate::error::{Error, Result};
use crate::richards::{EnvironmentModel, FeddesParams, RootGrowth, Series, SinkParams, SoilLayerParams, SoilProfile, SECONDS_PER_DAY};
use crate::seed::derive_seed;
use crate::solver::{BoundaryConditions, Grid, ObservationDesign, Problem, SolverOptions};

use super::io;

/// Estimation methods the harness can dispatch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gppde,
    GpcI,
    BoGpc,
    Bo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Gppde, Method::GpcI, Method::BoGpc, Method::Bo];

    pub fn label(self) -> &'static str {
        match self {
            Method::Gppde => "gppde",
            Method::GpcI => "gpc-i",
            Method::BoGpc => "bo-gpc",
            Method::Bo => "bo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected gppde, gpc-i, bo-gpc or bo)")))
    }

    /// Whether the method needs the state surrogate.
    pub fn uses_state_gp(self) -> bool {
        self != Method::Bo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SoilPreset {
    /// Homogeneous loam over the whole column.
    #[default]
    Loam,
    /// The six-layer field-site profile.
    FieldSite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub z_bottom: f64,
    pub z_top: f64,
    pub dz: f64,
    pub days: f64,
    pub dt: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            z_bottom: -0.30,
            z_top: -0.01,
            dz: 0.005,
            days: 90.0,
            dt: 400.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub soil: SoilPreset,
    /// Soil CSV; overrides `soil` when set.
    pub soil_file: Option<PathBuf>,
    /// Daily environment CSV; overrides the constants below when set.
    pub environment_file: Option<PathBuf>,
    pub transpiration: f64,
    pub rainfall: f64,
    pub evaporation: f64,
    pub feddes: FeddesParams,
    pub root_growth: RootGrowth,
    pub grid: GridConfig,
    pub solver: SolverOptions,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let env = EnvironmentModel::default();
        Self {
            soil: SoilPreset::default(),
            soil_file: None,
            environment_file: None,
            transpiration: env.transpiration(0.0),
            rainfall: 0.0,
            evaporation: 0.0,
            feddes: FeddesParams::default(),
            root_growth: env.root_growth,
            grid: GridConfig::default(),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Noise variance relative to the sample variance of the clean field.
    pub noise_b: f64,
    pub design: ObservationDesign,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            noise_b: 0.05,
            design: ObservationDesign::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    pub restarts: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { restarts: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionConfig {
    pub noise: NoisePrior,
    pub hpd_level: f64,
    pub hpd_grid: [usize; 2],
    pub bandwidth_floor_rel: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        let g = GpcIConfig::default();
        Self {
            noise: g.noise,
            hpd_level: g.hpd_level,
            hpd_grid: g.hpd_grid,
            bandwidth_floor_rel: g.bandwidth_floor_rel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_replicates: usize,
    pub noise_levels: Vec<f64>,
    pub methods: Vec<Method>,
    /// Replicate `i` uses seed `seed_base + i`.
    pub seed_base: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_replicates: 10,
            noise_levels: vec![0.05],
            methods: Method::ALL.to_vec(),
            seed_base: 0,
        }
    }
}

/// Everything needed to reproduce a run; serialized verbatim as the snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub truth: SinkParams,
    pub simulation: SimulationConfig,
    pub physics: PhysicsConfig,
    pub prior: Prior,
    pub gp: GpConfig,
    pub collocation: CollocationConfig,
    pub correction: CorrectionConfig,
    pub bo: BoproConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            truth: SinkParams::new(1.5, 3.2),
            simulation: SimulationConfig::default(),
            physics: PhysicsConfig::default(),
            prior: Prior::default(),
            gp: GpConfig::default(),
            collocation: CollocationConfig::default(),
            correction: CorrectionConfig::default(),
            bo: BoproConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // relative file references are resolved against the config location
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.physics.soil_file, &mut cfg.physics.environment_file].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.truth.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.simulation.noise_b >= 0.0) || self.simulation.design.is_empty() {
            return Err(Error::Config("simulation needs noise_b >= 0 and a non-empty design".into()));
        }
        let g = &self.physics.grid;
        Grid::uniform(g.z_bottom, g.z_top, g.dz, g.days * SECONDS_PER_DAY, g.dt)
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.prior.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.prior.dim() != 2 {
            return Err(Error::Config("the prior must cover (beta, L_m)".into()));
        }
        self.collocation.validate()?;
        self.gpc_i(0).validate()?;
        self.bo.validate()?;
        let e = &self.experiment;
        if e.n_replicates == 0 || e.methods.is_empty() || e.noise_levels.is_empty() {
            return Err(Error::Config("experiment needs replicates, methods and noise levels".into()));
        }
        if e.noise_levels.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<SoilProfile> {
        if let Some(path) = &self.physics.soil_file {
            return io::read_soil(path);
        }
        match self.physics.soil {
            SoilPreset::Loam => SoilProfile::homogeneous(SoilLayerParams::loam(-self.physics.grid.z_bottom)),
            SoilPreset::FieldSite => Ok(SoilProfile::field_site()),
        }
    }

    pub fn environment(&self) -> Result<EnvironmentModel> {
        let p = &self.physics;
        let mut env = match &p.environment_file {
            Some(path) => io::read_environment(path)?,
            None => EnvironmentModel {
                potential_transpiration: Series::Constant(p.transpiration),
                rainfall: Series::Constant(p.rainfall),
                evaporation: Series::Constant(p.evaporation),
                feddes: Series::Constant(p.feddes),
                root_growth: p.root_growth,
            },
        };
        env.root_growth = p.root_growth;
        env.validate()?;
        Ok(env)
    }

    pub fn problem(&self) -> Result<Problem> {
        let g = &self.physics.grid;
        let grid = Grid::uniform(g.z_bottom, g.z_top, g.dz, g.days * SECONDS_PER_DAY, g.dt)?;
        let problem = Problem {
            bc: BoundaryConditions::standard(&grid),
            grid,
            profile: self.profile()?,
            env: self.environment()?,
            opts: self.physics.solver.clone(),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// GPC-I settings with the collocation seed set to `seed`.
    pub fn gpc_i(&self, seed: u64) -> GpcIConfig {
        GpcIConfig {
            collocation: CollocationConfig {
                seed,
                ..self.collocation.clone()
            },
            noise: self.correction.noise,
            gp_restarts: self.gp.restarts,
            hpd_level: self.correction.hpd_level,
            hpd_grid: self.correction.hpd_grid,
            bandwidth_floor_rel: self.correction.bandwidth_floor_rel,
        }
    }

    pub fn bo_run(&self, seed: u64) -> BoRunConfig {
        BoRunConfig {
            bopro: self.bo.clone(),
            noise: self.correction.noise,
            collocation: CollocationConfig {
                seed,
                ..self.collocation.clone()
            },
            seed,
        }
    }

    /// Seeds for one replicate: observation noise, surrogate fit and method.
    pub fn replicate_seeds(&self, replicate: usize) -> ReplicateSeeds {
        let base = self.experiment.seed_base + replicate as u64;
        ReplicateSeeds {
            data: derive_seed(base, 10),
            gp: derive_seed(base, 11),
            method: derive_seed(base, 12),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplicateSeeds {
    pub data: u64,
    pub gp: u64,
    pub method: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[collocation]\nns = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c = RunConfig::from_toml("[collocation]\nN = 50\n[truth]\nbeta = 1.9\nL_m = 1.4\n").unwrap();
        assert_eq!(c.collocation.n_draws, 50);
        assert_eq!(c.collocation.n_s, 10);
        assert_eq!(c.truth, SinkParams::new(1.9, 1.4));
    }

    #[test]
    fn method_labels_parse() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.label()).unwrap(), m);
        }
        assert!(Method::parse("mcmc").is_err());
    }
}

//! Root water uptake: Feddes stress reduction, root growth and the sink term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// `theta = (beta, L_m)`: root-distribution shape and maximum rooting depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkParams {
    pub beta: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
}

impl SinkParams {
    pub fn new(beta: f64, l_m: f64) -> Self {
        Self { beta, l_m }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.beta, self.l_m]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            beta: v[0],
            l_m: v[1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta >= 0.0 && self.beta.is_finite() && self.l_m > 0.0 && self.l_m.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid sink parameters {self:?}")))
        }
    }
}

/// Matric-potential thresholds (m), `a4 < a3 <= a2 < a1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeddesParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl Default for FeddesParams {
    fn default() -> Self {
        Self {
            a1: -0.1,
            a2: -0.25,
            a3: -5.0,
            a4: -150.0,
        }
    }
}

impl FeddesParams {
    pub fn validate(&self) -> Result<()> {
        if self.a4 < self.a3 && self.a3 <= self.a2 && self.a2 < self.a1 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "Feddes thresholds must satisfy A4 < A3 <= A2 < A1, got {self:?}"
            )))
        }
    }
}

pub fn feddes_alpha(h: f64, a: &FeddesParams) -> f64 {
    if h < a.a4 || h >= a.a1 {
        0.0
    } else if h < a.a3 {
        (h - a.a4) / (a.a3 - a.a4)
    } else if h < a.a2 {
        1.0
    } else {
        (a.a1 - h) / (a.a1 - a.a2)
    }
}

/// Logistic root growth `Z_r(t) = 1 / (1 + exp(-kappa (t - t_mid)))`, clipped
/// to `[min_frac, 1]`. Times in days; `t_mid` is halfway to maturity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootGrowth {
    pub start_day: f64,
    pub days_to_maturity: f64,
    /// Growth rate per day; `None` means `10 / days_to_maturity`.
    pub kappa: Option<f64>,
    pub min_frac: f64,
}

impl Default for RootGrowth {
    fn default() -> Self {
        Self {
            start_day: 0.0,
            days_to_maturity: 60.0,
            kappa: None,
            min_frac: 0.05,
        }
    }
}

impl RootGrowth {
    pub fn validate(&self) -> Result<()> {
        let k = self.rate();
        if self.days_to_maturity > 0.0
            && k > 0.0
            && k.is_finite()
            && self.min_frac > 0.0
            && self.min_frac <= 1.0
            && self.start_day.is_finite()
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid root growth {self:?}")))
        }
    }

    fn rate(&self) -> f64 {
        self.kappa.unwrap_or(10.0 / self.days_to_maturity)
    }

    pub fn fraction(&self, t: f64) -> f64 {
        let day = t / SECONDS_PER_DAY;
        let mid = self.start_day + 0.5 * self.days_to_maturity;
        let z = 1.0 / (1.0 + (-self.rate() * (day - mid)).exp());
        z.clamp(self.min_frac, 1.0)
    }
}

/// A quantity that is either constant or tabulated per day (piecewise
/// constant; times past the table reuse the last entry).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series<T> {
    Constant(T),
    Daily(Vec<T>),
}

impl<T: Copy> Series<T> {
    pub fn at(&self, t: f64) -> T {
        match self {
            Series::Constant(v) => *v,
            Series::Daily(v) => {
                let i = (t / SECONDS_PER_DAY).floor().max(0.0) as usize;
                v[i.min(v.len() - 1)]
            }
        }
    }

    fn len_ok(&self) -> bool {
        !matches!(self, Series::Daily(v) if v.is_empty())
    }
}

/// Known time-dependent covariates of the flow problem.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentModel {
    /// Potential transpiration `T_p` (m/s).
    pub potential_transpiration: Series<f64>,
    /// Rainfall `R` (m/s) entering at the surface.
    pub rainfall: Series<f64>,
    /// Actual evaporation `E_a` (m/s) leaving at the surface.
    pub evaporation: Series<f64>,
    pub feddes: Series<FeddesParams>,
    pub root_growth: RootGrowth,
}

impl Default for EnvironmentModel {
    fn default() -> Self {
        Self {
            potential_transpiration: Series::Constant(DEFAULT_TRANSPIRATION),
            rainfall: Series::Constant(0.0),
            evaporation: Series::Constant(0.0),
            feddes: Series::Constant(FeddesParams::default()),
            root_growth: RootGrowth::default(),
        }
    }
}

/// Default potential transpiration (m/s), roughly 0.35 mm per day.
pub const DEFAULT_TRANSPIRATION: f64 = 4e-9;

impl EnvironmentModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.potential_transpiration.len_ok()
            && self.rainfall.len_ok()
            && self.evaporation.len_ok()
            && self.feddes.len_ok())
        {
            return Err(Error::InvalidArgument("empty environment series".into()));
        }
        let nonneg = |s: &Series<f64>| match s {
            Series::Constant(v) => v.is_finite() && *v >= 0.0,
            Series::Daily(v) => v.iter().all(|x| x.is_finite() && *x >= 0.0),
        };
        if !nonneg(&self.potential_transpiration) || !nonneg(&self.evaporation) {
            return Err(Error::InvalidArgument(
                "transpiration and evaporation must be finite and non-negative".into(),
            ));
        }
        match &self.rainfall {
            Series::Constant(v) if !v.is_finite() => {
                return Err(Error::InvalidArgument("non-finite rainfall".into()))
            }
            Series::Daily(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(Error::InvalidArgument("non-finite rainfall".into()))
            }
            _ => {}
        }
        match &self.feddes {
            Series::Constant(a) => a.validate()?,
            Series::Daily(v) => v.iter().try_for_each(|a| a.validate())?,
        }
        self.root_growth.validate()
    }

    pub fn transpiration(&self, t: f64) -> f64 {
        self.potential_transpiration.at(t)
    }

    pub fn root_fraction(&self, t: f64) -> f64 {
        self.root_growth.fraction(t)
    }

    pub fn feddes_at(&self, t: f64) -> FeddesParams {
        self.feddes.at(t)
    }

    /// Net surface flux `R - E_a` (positive into the soil).
    pub fn surface_flux(&self, t: f64) -> f64 {
        self.rainfall.at(t) - self.evaporation.at(t)
    }

    /// `alpha(h, A(t)) T_p(t)`: the theta-independent uptake intensity.
    pub fn uptake_intensity(&self, h: f64, t: f64) -> f64 {
        feddes_alpha(h, &self.feddes_at(t)) * self.transpiration(t)
    }

    /// Current rooting depth `L_m Z_r(t)`.
    pub fn rooting_depth(&self, theta: &SinkParams, t: f64) -> Result<f64> {
        let l = theta.l_m * self.root_fraction(t);
        if l > 0.0 && l.is_finite() {
            Ok(l)
        } else {
            Err(Error::DegenerateRootZone { t })
        }
    }
}

/// Normalized root density `(1 + beta)/L (1 - d/L)^beta`, zero below `L`.
pub fn root_density(depth: f64, beta: f64, rooting_depth: f64) -> f64 {
    let d = depth.abs();
    if d > rooting_depth {
        return 0.0;
    }
    (1.0 + beta) / rooting_depth * (1.0 - d / rooting_depth).powf(beta)
}

/// Sink `S` at head `h`, coordinate `z` (sign ignored) and time `t`.
pub fn sink(h: f64, z: f64, t: f64, theta: &SinkParams, env: &EnvironmentModel) -> Result<f64> {
    let l = env.rooting_depth(theta, t)?;
    Ok(env.uptake_intensity(h, t) * root_density(z, theta.beta, l))
}

/// `S` from a precomputed uptake intensity, with its gradient in
/// `(beta, L_m)`. `root_fraction` is `Z_r(t)`.
pub fn sink_with_gradient(
    intensity: f64,
    depth: f64,
    root_fraction: f64,
    theta: &SinkParams,
) -> (f64, [f64; 2]) {
    let l = theta.l_m * root_fraction;
    let d = depth.abs();
    if intensity == 0.0 || d >= l {
        let s = intensity * root_density(d, theta.beta, l);
        return (s, [0.0, 0.0]);
    }
    let beta = theta.beta;
    let r = 1.0 - d / l;
    let s = intensity * (1.0 + beta) / l * r.powf(beta);
    let ds_dbeta = s * (1.0 / (1.0 + beta) + r.ln());
    let ds_dl = s * (-1.0 / l + beta * (d / (l * l)) / r);
    (s, [ds_dbeta, ds_dl * root_fraction])
}
